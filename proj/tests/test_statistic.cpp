#include <doctest.h>

#include "hdiv/dgp.hpp"
#include "hdiv/montecarlo.hpp"
#include "hdiv/statistic.hpp"
#include "test_support.hpp"

using namespace hdiv;
using namespace hdiv::testing;

namespace {

Dataset small_example() {
    Eigen::VectorXd y(4), x(4);
    y << 1, 2, 0, -1;
    x << 0, 1, 1, 2;
    Eigen::MatrixXd z(4, 2);
    z << 1, 0, 2, 1, 0, 1, 1, -1;
    return Dataset(y, x, InstrumentMatrix(z));
}

Dataset random_dataset(Eigen::Index n, Eigen::Index k, RandomStream& rng) {
    return Dataset(normal_vector(n, rng), normal_vector(n, rng),
                   InstrumentMatrix(normal_matrix(n, k, rng)));
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::numeric;
}

}  // namespace

TEST_CASE("normalize_residual") {
    Eigen::VectorXd y(3), x = Eigen::VectorXd::Zero(3);
    y << 3, 4, 0;
    const auto r = normalize_residual(y, x, 17.0);
    CHECK(r.unit[0] == doctest::Approx(0.6));
    CHECK(r.unit[1] == doctest::Approx(0.8));
    CHECK(r.unit[2] == 0.0);
    CHECK(r.norm_sq == doctest::Approx(25.0));

    CHECK(code_of([&] { normalize_residual(y, y, 1.0); }) == Errc::degenerate_residual);

    auto rng = test_stream(10);
    for (int i = 0; i < 50; ++i) {
        const auto n = normal_vector(7, rng);
        CHECK(std::abs(normalize_residual(n, normal_vector(7, rng), 0.3).unit.norm() - 1.0) <
              1e-12);
    }
}

TEST_CASE("trace_sigma2_hat") {
    CHECK(code_of([] { trace_sigma2_hat(InstrumentMatrix(Eigen::MatrixXd::Identity(2, 2))); }) ==
          Errc::degenerate_instruments);
    CHECK(trace_sigma2_hat(InstrumentMatrix(Eigen::MatrixXd::Ones(2, 2))) == doctest::Approx(4.0));

    auto rng = test_stream(11);
    for (auto [n, k] : {std::pair{6, 3}, std::pair{3, 6}, std::pair{30, 10}, std::pair{12, 40}}) {
        const Eigen::MatrixXd z = normal_matrix(n, k, rng);
        CHECK(rel_err(trace_sigma2_hat(InstrumentMatrix(z)), brute_trace_sigma2(z)) < 1e-10);
    }
}

TEST_CASE("q_statistic frozen values") {
    const Dataset d = small_example();
    const auto oracle = q_statistic(d, Hypothesis{0.0}, 1.0);
    CHECK(oracle.mode == Mode::oracle);
    CHECK(oracle.trace_sigma2 == 1.0);
    CHECK(rel_err(oracle.statistic, 1.3552879972742160884L) < 1e-12);

    const auto feasible = q_statistic(d, Hypothesis{0.5});
    CHECK(feasible.mode == Mode::feasible);
    CHECK(rel_err(feasible.trace_sigma2, 1.3333333333333333333L) < 1e-14);
    CHECK(rel_err(feasible.statistic, -0.31639242510949383768L) < 1e-12);
    CHECK(feasible.n == 4);
    CHECK(feasible.k == 2);
}

TEST_CASE("q_statistic with identity Gram is zero") {
    auto rng = test_stream(12);
    const Eigen::Index n = 9;
    const Dataset d(normal_vector(n, rng), normal_vector(n, rng),
                    InstrumentMatrix(std::sqrt(double(n)) * Eigen::MatrixXd::Identity(n, n)));
    CHECK(std::abs(q_statistic(d, Hypothesis{0.7}, 3.0).statistic) < 1e-12);
}

TEST_CASE("feasible equals oracle at the estimated trace") {
    auto rng = test_stream(13);
    for (int i = 0; i < 20; ++i) {
        const Dataset d = random_dataset(20 + i, 5 + 3 * i, rng);
        const Hypothesis hyp{0.25};
        const auto f = q_statistic(d, hyp);
        const auto o = q_statistic(d, hyp, trace_sigma2_hat(d.z()));
        CHECK(f.statistic == o.statistic);
        CHECK(f.p_value == o.p_value);
    }
}

TEST_CASE("p_value") {
    CHECK(p_value(0.0, Alternative::two_sided) == 1.0);
    CHECK(p_value(1.6448536, Alternative::greater) == doctest::Approx(0.05).epsilon(1e-6 / 0.05));
    CHECK(std::abs(p_value(1.6448536, Alternative::greater) - 0.05) < 1e-6);
    CHECK(std::abs(p_value(1.9599640, Alternative::two_sided) - 0.05) < 1e-6);
    CHECK(std::abs(p_value(-1.9599640, Alternative::two_sided) - 0.05) < 1e-6);
    CHECK(p_value(-40.0, Alternative::greater) == 1.0);
    CHECK(p_value(40.0, Alternative::greater) >= 0.0);
    CHECK(std::abs(normal_cdf(0.0) - 0.5) < 1e-15);
    CHECK(std::abs(normal_cdf(-1.0) - 0.15865525393145705) < 1e-15);
    CHECK(code_of([] { p_value(std::nan(""), Alternative::greater); }) == Errc::validation);

    auto rng = test_stream(14);
    const Dataset d = random_dataset(30, 10, rng);
    for (double alpha : {0.01, 0.05, 0.5}) {
        const auto out = q_statistic(d, Hypothesis{0.0, Alternative::two_sided, alpha});
        CHECK(out.p_value >= 0.0);
        CHECK(out.p_value <= 1.0);
        CHECK(out.reject == (out.p_value < alpha));
    }
}

TEST_CASE("hypothesis and dataset validation") {
    CHECK(code_of([] { Hypothesis{0.0, Alternative::greater, 1.0}.validate(); }) ==
          Errc::validation);
    CHECK(code_of([] { Hypothesis{0.0, Alternative::greater, 0.0}.validate(); }) ==
          Errc::validation);
    CHECK(code_of([] {
              Dataset(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4),
                      InstrumentMatrix(Eigen::MatrixXd::Ones(3, 2)));
          }) == Errc::validation);
    CHECK(code_of([] { q_statistic(small_example(), Hypothesis{0.0}, -1.0); }) ==
          Errc::validation);
    CHECK(parse_alternative("two-sided") == Alternative::two_sided);
    CHECK(parse_alternative("greater") == Alternative::greater);
}

TEST_CASE("statistic invariances") {
    auto rng = test_stream(15);
    for (int i = 0; i < 25; ++i) {
        const Eigen::Index n = 10 + i, k = 3 + (7 * i) % 31;
        const Dataset d = random_dataset(n, k, rng);
        const Hypothesis hyp{0.4};
        const double base = q_statistic(d, hyp).statistic;

        const double c = (i % 2 ? -1.0 : 1.0) * (0.1 + 3.0 * uniform01(rng));
        const Dataset scaled(c * d.y(), c * d.x(), d.z());
        CHECK(std::abs(q_statistic(scaled, hyp).statistic - base) < 1e-10);

        const Dataset rotated(d.y(), d.x(),
                              InstrumentMatrix(d.z().values() * random_orthogonal(k, rng)));
        CHECK(std::abs(q_statistic(rotated, hyp).statistic - base) < 1e-8);

        const Eigen::MatrixXd p = random_permutation(n, rng);
        const Dataset permuted(p * d.y(), p * d.x(), InstrumentMatrix(p * d.z().values()));
        CHECK(std::abs(q_statistic(permuted, hyp).statistic - base) < 1e-10);

        // slow path through the SVD of Z
        const auto res = normalize_residual(d.y(), d.x(), hyp.beta0);
        const double tr = gram_summary(d.z().values()).trace_sbar;
        const double t = trace_sigma2_hat(d.z());
        const double slow = std::sqrt(double(n * n) / (2 * t)) *
                            (eigen_quadratic(d.z().values(), res.unit) - tr / double(n));
        CHECK(rel_err(slow, base) < 1e-8);
    }
}

TEST_CASE("prepared instruments reuse") {
    auto rng = test_stream(16);
    const Dataset d = random_dataset(25, 8, rng);
    const PreparedInstruments prep(d.z());
    for (double b : {-1.0, 0.0, 2.5}) {
        const auto a = q_statistic(d, Hypothesis{b});
        const auto p = q_statistic(prep, d.y(), d.x(), Hypothesis{b});
        CHECK(a.statistic == p.statistic);
    }
}

TEST_CASE("invert_ci basics") {
    const Dataset d = small_example();
    CHECK(invert_ci(d, 0.05, BetaGrid{-1, 1, 5}).size() <= 1);
    CHECK_THROWS_AS(invert_ci(d, 0.05, BetaGrid{1, -1, 5}), Error);
    CHECK_THROWS_AS(invert_ci(d, 0.05, BetaGrid{0, 1, 1}), Error);

    // alpha just below 1 rejects nearly everything at the greater tail
    auto rng = test_stream(17);
    const Eigen::Index n = 200, k = 20;
    const Eigen::MatrixXd z = normal_matrix(n, k, rng);
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, 5.0 / std::sqrt(double(k)));
    const Eigen::VectorXd x = z * pi + normal_vector(n, rng);
    const Eigen::VectorXd y = x + normal_vector(n, rng);
    const Dataset strong(y, x, InstrumentMatrix(z));
    CHECK(invert_ci(strong, 0.05, BetaGrid{50, 60, 11}, Alternative::two_sided).empty());

    const auto set = invert_ci(strong, 0.05, BetaGrid{-3, 5, 801}, Alternative::two_sided);
    for (std::size_t i = 1; i < set.size(); ++i)
        CHECK(set[i].lo > set[i - 1].hi);
    for (const auto& iv : set)
        CHECK(iv.lo <= iv.hi);

    const auto one = invert_ci(strong, 0.999999, BetaGrid{1.0, 1.0, 1}, Alternative::two_sided);
    CHECK(one.size() <= 1);
    const auto lenient = invert_ci(strong, 1e-12, BetaGrid{1.0, 1.0, 1}, Alternative::two_sided);
    REQUIRE(lenient.size() == 1);
    CHECK(lenient[0] == Interval{1.0, 1.0});
}

namespace {

bool covers(const std::vector<Interval>& set, double beta) {
    for (const auto& iv : set)
        if (iv.lo - 1e-9 <= beta && beta <= iv.hi + 1e-9)
            return true;
    return false;
}

}  // namespace

TEST_CASE("invert_ci coverage, strong identification") {
    const Eigen::Index n = 200, k = 20;
    const double beta = 1.0;
    int hits = 0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        auto rng = derive_stream(77, stable_hash("coverage-strong"), std::uint64_t(r));
        const Eigen::MatrixXd z = normal_matrix(n, k, rng);
        Eigen::VectorXd pi = normal_vector(k, rng);
        pi *= 5.0 / pi.norm();
        const Eigen::VectorXd eps = normal_vector(n, rng);
        const Eigen::VectorXd x = z * pi + normal_vector(n, rng);
        const Dataset d(x * beta + eps, x, InstrumentMatrix(z));
        hits += covers(invert_ci(d, 0.05, BetaGrid{0.0, 2.0, 201}, Alternative::two_sided), beta);
    }
    const double rate = double(hits) / reps;
    MESSAGE("coverage " << rate);
    CHECK(rate >= 0.93);
    CHECK(rate <= 0.97);
}

TEST_CASE("invert_ci coverage at h = 0") {
    InstrumentDesign design;
    design.k = 100;
    design.factors = false;
    design.toeplitz_rho = 0.0;
    const SimCell cell = make_cell(400, 0.25, 0.5, 0.0, NetworkSpec{0.0, GraphSpec{0.0}}, 2.0, design);
    const InstrumentGenerator gen(cell.design);
    int hits = 0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r) {
        auto rng = derive_stream(78, stable_hash("coverage-h0"), std::uint64_t(r));
        const auto sim = assemble_dataset(cell, gen, rng);
        hits += covers(invert_ci(sim.data, 0.05, BetaGrid{1.0, 3.0, 201}), sim.truth.beta);
    }
    const double rate = double(hits) / reps;
    MESSAGE("coverage " << rate);
    CHECK(rate >= 0.93);
    CHECK(rate <= 0.97);
}
