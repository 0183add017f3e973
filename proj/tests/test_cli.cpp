#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hdiv/io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int status = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(HDIV_CLI_PATH) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0)
        r.out.append(buf, got);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("hdiv-cli-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return (path / name).string();
    }
};

const char* kSmall = "y,x,z1,z2\n1,0,1,0\n2,1,2,1\n0,1,0,1\n-1,2,1,-1\n";

}  // namespace

TEST_CASE("cli test command") {
    TempDir tmp;
    const auto data = tmp.write("d.csv", kSmall);
    const auto r = run("test --data " + data + " --beta0 0.5");
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    for (const char* key : {"statistic", "p_value", "reject", "n", "k", "trace_sigma2", "mode"})
        CHECK(j.contains(key));
    CHECK(j["n"] == 4);
    CHECK(j["statistic"].get<double>() == doctest::Approx(-0.31639242510949383768).epsilon(1e-12));

    CHECK(run("test --data " + (tmp.path / "missing.csv").string() + " --beta0 0").status == 2);
    CHECK(run("test --data " + tmp.write("r.csv", "y,x,z1\n1,2,3\n4,5\n") + " --beta0 0").status == 3);
    CHECK(run("test --data " + tmp.write("o.csv", "y,x,z1,z2\n1,0,1,0\n2,1,0,1\n") + " --beta0 0")
              .status == 4);
    CHECK(run("test --data " + tmp.write("z.csv", "y,x,z1\n1,1,1\n2,2,3\n") + " --beta0 1").status ==
          4);
    CHECK(run("test --data " + data).status == 3);
    CHECK(run("test --data " + data + " --beta0 0 --alpha 2").status == 3);
    CHECK(run("bogus").status == 3);

    const auto csv = run("test --data " + data + " --beta0 0.5 --format csv");
    CHECK(csv.status == 0);
    CHECK(csv.out.rfind("statistic,", 0) == 0);
    const auto file = (tmp.path / "out.json").string();
    CHECK(run("test --data " + data + " --beta0 0.5 -o " + file).status == 0);
    std::stringstream written;
    written << std::ifstream(file).rdbuf();
    CHECK(written.str() == r.out);
}

TEST_CASE("cli invert command") {
    TempDir tmp;
    auto rng = hdiv::testing::test_stream(400);
    const Eigen::Index n = 200, k = 10;
    const Eigen::MatrixXd z = hdiv::normal_matrix(n, k, rng);
    const Eigen::VectorXd x = z * Eigen::VectorXd::Constant(k, 1.0) + hdiv::normal_vector(n, rng);
    const Eigen::VectorXd y = 1.5 * x + hdiv::normal_vector(n, rng);
    std::ostringstream buf;
    hdiv::write_dataset_csv(buf, hdiv::Dataset(y, x, hdiv::InstrumentMatrix(z)));
    const auto data = tmp.write("strong.csv", buf.str());

    // two-stage least squares, computed independently of the library
    const Eigen::VectorXd xhat = z * z.colPivHouseholderQr().solve(x);
    const double tsls = xhat.dot(y) / xhat.dot(x);

    const auto r = run("invert --data " + data + " --lo 0 --hi 3 --steps 301 --alt two-sided");
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    bool covered = false;
    for (const auto& iv : j["intervals"])
        covered |= iv[0].get<double>() <= tsls && tsls <= iv[1].get<double>();
    CHECK(covered);

    const auto none = run("invert --data " + data + " --lo 50 --hi 60 --steps 11 --alt two-sided");
    CHECK(none.status == 0);
    CHECK(json::parse(none.out)["intervals"] == json::array());

    const std::string p = std::to_string(tsls);
    const auto single = run("invert --data " + data + " --lo " + p + " --hi " + p +
                            " --steps 1 --alt two-sided");
    REQUIRE(single.status == 0);
    const json sj = json::parse(single.out);
    REQUIRE(sj["intervals"].size() == 1);
    CHECK(sj["intervals"][0][0] == sj["intervals"][0][1]);

    CHECK(run("invert --data " + data + " --lo 1 --hi 0 --steps 5").status == 3);
}

TEST_CASE("cli simulate command") {
    TempDir tmp;
    const auto cfg = tmp.write("c.json", R"({"n": 40, "ratios": [0.5], "rhos": [0.5, -0.9],
        "hs": [0, 5], "processes": ["NET-E", "MUL-E"]})");
    const auto a = run("simulate --config " + cfg + " --reps 20 --seed 9 --threads 1");
    const auto b = run("simulate --config " + cfg + " --reps 20 --seed 9 --threads 4");
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    const json j = json::parse(a.out);
    CHECK(j["cells"].size() == 8);
    CHECK(j["metadata"]["base_seed"] == 9);
    CHECK(j["metadata"]["alternative"] == "greater");

    CHECK(run("simulate --config " + cfg + " --reps 0 --seed 1").status == 3);
    CHECK(run("simulate --config " + tmp.write("bad.json", R"({"nope": 1})") + " --reps 2 --seed 1").status ==
          3);
    CHECK(run("simulate --config " + (tmp.path / "none.json").string() + " --reps 2 --seed 1").status == 2);
    CHECK(run("simulate --reps 2 --seed 1").status == 3);

    const auto failing = tmp.write("fail.json", R"({"n": 20, "ratios": [0.5], "rhos": [0.5],
        "hs": [0], "processes": [{"type": "spatial", "edge_threshold": 0.999999, "form": "literal"}]})");
    CHECK(run("simulate --config " + failing + " --reps 20 --seed 1").status == 5);

    const auto md = run("simulate --config " + cfg + " --reps 20 --seed 9 --format markdown");
    CHECK(md.status == 0);
    CHECK(md.out.find("MUL-E") != std::string::npos);
}

TEST_CASE("cli diagnose command") {
    const auto r = run("diagnose --null-normality --n 60 --k 15 --reps 200 --seed 3");
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    CHECK(j.contains("ks_statistic"));
    CHECK(j.contains("p_value"));
    CHECK(run("diagnose --null-normality --n 60 --k 15 --reps 200 --seed 3").out == r.out);
    CHECK(run("diagnose --n 60 --k 15 --reps 200 --seed 3").status == 3);
}
