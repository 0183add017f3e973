#include "hdiv/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace hdiv {

using nlohmann::json;

OutputFormat parse_output_format(std::string_view text) {
    if (text == "json")
        return OutputFormat::json;
    if (text == "csv")
        return OutputFormat::csv;
    if (text == "markdown" || text == "md")
        return OutputFormat::markdown;
    throw Error(Errc::validation, "unknown output format '" + std::string(text) + "'");
}

std::string format_double(double v) {
    // shortest text that parses back to the same double
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// --- CSV -------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos)
            return out;
        start = pos + 1;
    }
}

[[noreturn]] void csv_error(std::size_t row, std::size_t col, const std::string& what) {
    throw Error(Errc::validation, "csv row " + std::to_string(row) + ", column " +
                                      std::to_string(col) + ": " + what);
}

}  // namespace

Dataset parse_dataset_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    // skip a UTF-8 byte-order mark and blank leading lines
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
            line.erase(0, 3);
        if (!trim(line).empty())
            break;
    }
    if (trim(line).empty())
        throw Error(Errc::validation, "csv: empty file (header `y,x,z1,...,zK` required)");

    const auto header = split_commas(line);
    if (header.size() < 3)
        csv_error(line_no, header.size(), "need columns y, x and at least one instrument");
    if (header[0] != "y")
        csv_error(line_no, 1, "expected header 'y', got '" + std::string(header[0]) + "'");
    if (header[1] != "x")
        csv_error(line_no, 2, "expected header 'x', got '" + std::string(header[1]) + "'");
    for (std::size_t j = 2; j < header.size(); ++j) {
        const std::string expected = "z" + std::to_string(j - 1);
        if (header[j] != expected)
            csv_error(line_no, j + 1,
                      "expected header '" + expected + "', got '" + std::string(header[j]) + "'");
    }
    const std::size_t cols = header.size();

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto cells = split_commas(line);
        if (cells.size() != cols)
            csv_error(line_no, std::min(cells.size(), cols) + 1,
                      "expected " + std::to_string(cols) + " fields, got " +
                          std::to_string(cells.size()));
        for (std::size_t j = 0; j < cols; ++j) {
            std::string_view cell = cells[j];
            if (!cell.empty() && cell.front() == '+')
                cell.remove_prefix(1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
                csv_error(line_no, j + 1, "not a number: '" + std::string(cells[j]) + "'");
            if (!std::isfinite(v))
                csv_error(line_no, j + 1, "non-finite value");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows < 2)
        throw Error(Errc::validation, "csv: need at least 2 observations, got " +
                                          std::to_string(rows));

    const Eigen::Index n = Eigen::Index(rows);
    const Eigen::Index k = Eigen::Index(cols - 2);
    Eigen::VectorXd y(n), x(n);
    Eigen::MatrixXd z(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* row = values.data() + i * Eigen::Index(cols);
        y[i] = row[0];
        x[i] = row[1];
        for (Eigen::Index j = 0; j < k; ++j)
            z(i, j) = row[2 + j];
    }
    return Dataset(std::move(y), std::move(x), InstrumentMatrix(std::move(z)));
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::missing_input, "cannot open data file '" + path.string() + "'");
    return parse_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    out << "y,x";
    for (Eigen::Index j = 0; j < data.k(); ++j)
        out << ",z" << j + 1;
    out << '\n';
    const auto& z = data.z().values();
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << format_double(data.y()[i]) << ',' << format_double(data.x()[i]);
        for (Eigen::Index j = 0; j < data.k(); ++j)
            out << ',' << format_double(z(i, j));
        out << '\n';
    }
}

// --- JSON config -----------------------------------------------------------

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    throw Error(Errc::validation, "config " + (path.empty() ? std::string("/") : path) + ": " + what);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object())
        config_error(path, "expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            config_error(path + "/" + key, "unknown key");
}

double get_number(const json& v, const std::string& path) {
    if (!v.is_number())
        config_error(path, "expected a number");
    return v.get<double>();
}

std::vector<double> get_numbers(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty())
        config_error(path, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(get_number(v[i], path + "/" + std::to_string(i)));
    return out;
}

std::string normalize_process_name(std::string name) {
    for (auto& c : name)
        c = char(std::tolower(static_cast<unsigned char>(c)));
    return name;
}

ErrorProcessSpec parse_process(const json& v, const std::string& path) {
    std::string type;
    if (v.is_string())
        type = normalize_process_name(v.get<std::string>());
    else if (v.is_object() && v.contains("type") && v["type"].is_string())
        type = normalize_process_name(v["type"].get<std::string>());
    else
        config_error(path, "expected a process name or an object with a 'type' string");

    if (type == "network" || type == "net-e" || type == "net") {
        NetworkSpec s;
        if (v.is_object()) {
            check_keys(v, path, {"type", "gamma", "expected_degree"});
            if (v.contains("gamma"))
                s.gamma = get_number(v["gamma"], path + "/gamma");
            if (v.contains("expected_degree"))
                s.graph.expected_degree = get_number(v["expected_degree"], path + "/expected_degree");
        }
        return s;
    }
    if (type == "spatial" || type == "spa-e" || type == "sar-e" || type == "spa") {
        SpatialSpec s;
        if (v.is_object()) {
            check_keys(v, path, {"type", "rho_s", "edge_threshold", "form"});
            if (v.contains("rho_s"))
                s.rho_s = get_number(v["rho_s"], path + "/rho_s");
            if (v.contains("edge_threshold"))
                s.edge_threshold = get_number(v["edge_threshold"], path + "/edge_threshold");
            if (v.contains("form")) {
                const auto& f = v["form"];
                if (f == "literal")
                    s.form = SpatialForm::literal;
                else if (f == "autoregressive")
                    s.form = SpatialForm::autoregressive;
                else
                    config_error(path + "/form", "expected 'literal' or 'autoregressive'");
            }
        }
        return s;
    }
    if (type == "multiplicative" || type == "mul-e" || type == "mul") {
        MultiplicativeSpec s;
        if (v.is_object()) {
            check_keys(v, path, {"type", "a", "mix_weight", "shift"});
            if (v.contains("a"))
                s.a = get_number(v["a"], path + "/a");
            if (v.contains("mix_weight"))
                s.mix_weight = get_number(v["mix_weight"], path + "/mix_weight");
            if (v.contains("shift"))
                s.shift = get_number(v["shift"], path + "/shift");
        }
        return s;
    }
    config_error(v.is_string() ? path : path + "/type", "unknown process '" + type + "'");
}

}  // namespace

std::vector<SimCell> SimulationConfig::cells() const {
    return make_grid(n, ratios, rhos, hs, processes, beta0, design);
}

SimulationConfig parse_simulation_config(const json& doc) {
    check_keys(doc, "", {"n", "ratios", "rhos", "hs", "processes", "beta0", "alpha",
                         "alternative", "design"});
    SimulationConfig cfg;
    if (doc.contains("n")) {
        const auto& v = doc["n"];
        if (!v.is_number_integer() || v.get<long long>() < 2)
            config_error("/n", "expected an integer >= 2");
        cfg.n = Eigen::Index(v.get<long long>());
    }
    if (doc.contains("ratios"))
        cfg.ratios = get_numbers(doc["ratios"], "/ratios");
    if (doc.contains("rhos"))
        cfg.rhos = get_numbers(doc["rhos"], "/rhos");
    if (doc.contains("hs"))
        cfg.hs = get_numbers(doc["hs"], "/hs");
    if (doc.contains("processes")) {
        const auto& p = doc["processes"];
        if (!p.is_array() || p.empty())
            config_error("/processes", "expected a nonempty array");
        cfg.processes.clear();
        for (std::size_t i = 0; i < p.size(); ++i)
            cfg.processes.push_back(parse_process(p[i], "/processes/" + std::to_string(i)));
    }
    if (doc.contains("beta0"))
        cfg.beta0 = get_number(doc["beta0"], "/beta0");
    if (doc.contains("alpha"))
        cfg.alpha = get_number(doc["alpha"], "/alpha");
    if (doc.contains("alternative")) {
        if (!doc["alternative"].is_string())
            config_error("/alternative", "expected a string");
        try {
            cfg.alternative = parse_alternative(doc["alternative"].get<std::string>());
        } catch (const Error& e) {
            config_error("/alternative", e.what());
        }
    }
    if (doc.contains("design")) {
        const auto& d = doc["design"];
        check_keys(d, "/design", {"toeplitz_rho", "factor_norms_sq", "pi_norm_sq", "pi_direction"});
        if (d.contains("toeplitz_rho"))
            cfg.design.toeplitz_rho = get_number(d["toeplitz_rho"], "/design/toeplitz_rho");
        if (d.contains("pi_norm_sq"))
            cfg.design.pi_norm_sq = get_number(d["pi_norm_sq"], "/design/pi_norm_sq");
        if (d.contains("pi_direction")) {
            const auto& v = d["pi_direction"];
            if (v == "random")
                cfg.design.pi_direction = PiDirection::random;
            else if (v == "equal")
                cfg.design.pi_direction = PiDirection::equal_weights;
            else
                config_error("/design/pi_direction", "expected 'random' or 'equal'");
        }
        if (d.contains("factor_norms_sq")) {
            const auto& f = d["factor_norms_sq"];
            if (f.is_null()) {
                cfg.design.factors = false;
            } else {
                const auto vals = get_numbers(f, "/design/factor_norms_sq");
                if (vals.size() != 3)
                    config_error("/design/factor_norms_sq", "expected exactly 3 numbers or null");
                cfg.design.factor_norms_sq = {vals[0], vals[1], vals[2]};
            }
        }
    }
    // Validate every cell up front so errors surface before any simulation.
    try {
        cfg.hypothesis().validate();
        (void)cfg.cells();
    } catch (const Error& e) {
        config_error("", e.what());
    }
    return cfg;
}

SimulationConfig read_simulation_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::missing_input, "cannot open config file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::validation, std::string("config: invalid JSON: ") + e.what());
    }
    return parse_simulation_config(doc);
}

// --- serialization ---------------------------------------------------------

json to_json(const TestOutcome& o, const Hypothesis& hyp) {
    return json{
        {"schema_version", kSchemaVersion},
        {"statistic", o.statistic},
        {"p_value", o.p_value},
        {"reject", o.reject},
        {"n", o.n},
        {"k", o.k},
        {"trace_sigma2", o.trace_sigma2},
        {"trace_sbar", o.trace_sbar},
        {"mode", std::string(to_string(o.mode))},
        {"beta0", hyp.beta0},
        {"alpha", hyp.alpha},
        {"alternative", std::string(to_string(hyp.alternative))},
    };
}

namespace {

json process_json(const ErrorProcessSpec& spec) {
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, NetworkSpec>)
                return {{"type", "network"}, {"gamma", s.gamma},
                        {"expected_degree", s.graph.expected_degree}};
            else if constexpr (std::is_same_v<T, SpatialSpec>)
                return {{"type", "spatial"}, {"rho_s", s.rho_s},
                        {"edge_threshold", s.edge_threshold},
                        {"form", s.form == SpatialForm::literal ? "literal" : "autoregressive"}};
            else
                return {{"type", "multiplicative"}, {"a", s.a}, {"mix_weight", s.mix_weight},
                        {"shift", s.shift}};
        },
        spec);
}

std::string ratio_label(double r) {
    static const std::map<double, std::string> known{{0.25, "1/4"}, {0.5, "1/2"}};
    if (auto it = known.find(r); it != known.end())
        return it->second;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", r);
    return buf;
}

std::string rho_label(double rho) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", rho);
    std::string s = buf;
    // .5 / -.9 as in the usual table layout
    if (s.rfind("0.", 0) == 0)
        s.erase(0, 1);
    else if (s.rfind("-0.", 0) == 0)
        s.erase(1, 1);
    return s;
}

template <typename T>
void push_unique(std::vector<T>& v, const T& x) {
    if (std::find(v.begin(), v.end(), x) == v.end())
        v.push_back(x);
}

std::string table_markdown(const RejectionTable& t) {
    // Columns are keyed by the full process parameters; labels only name them.
    std::vector<std::string> processes;
    std::vector<double> rhos, ratios, hs;
    std::map<std::string, std::string> names;
    for (const auto& e : t.entries) {
        push_unique(processes, canonical(e.cell.process));
        names.emplace(canonical(e.cell.process), process_label(e.cell.process));
        push_unique(rhos, e.cell.rho);
        push_unique(ratios, e.cell.ratio);
        push_unique(hs, e.cell.h);
    }
    std::map<std::string, int> seen;
    for (const auto& p : processes)
        if (int count = ++seen[names[p]]; count > 1)
            names[p] += "#" + std::to_string(count);

    auto lookup = [&](const std::string& p, double rho, double ratio, double h) {
        for (const auto& e : t.entries)
            if (canonical(e.cell.process) == p && e.cell.rho == rho && e.cell.ratio == ratio &&
                e.cell.h == h)
                return &e;
        return static_cast<const RejectionRate*>(nullptr);
    };

    std::ostringstream out;
    out << "Rejection rates (%) of the feasible test; alpha = " << t.meta.alpha
        << ", alternative = " << to_string(t.meta.alternative) << ", reps = " << t.meta.reps
        << ", seed = " << t.meta.base_seed << ", version " << t.meta.software_version << "\n\n";
    out << "| (K/N, rho) |";
    for (const auto& p : processes)
        for (double rho : rhos)
            out << ' ' << names[p] << ' ' << rho_label(rho) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < processes.size() * rhos.size(); ++i)
        out << "---:|";
    out << '\n';
    for (double h : hs) {
        out << "| **[h=" << h << "]** |";
        for (std::size_t i = 0; i < processes.size() * rhos.size(); ++i)
            out << " |";
        out << '\n';
        for (double ratio : ratios) {
            out << "| " << ratio_label(ratio) << " |";
            for (const auto& p : processes)
                for (double rho : rhos) {
                    const auto* e = lookup(p, rho, ratio, h);
                    char buf[32];
                    if (e)
                        std::snprintf(buf, sizeof buf, " %.1f |", 100.0 * e->rate);
                    else
                        std::snprintf(buf, sizeof buf, " - |");
                    out << buf;
                }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace

json to_json(const RejectionTable& t) {
    json cells = json::array();
    for (const auto& e : t.entries)
        cells.push_back({
            {"process", process_label(e.cell.process)},
            {"process_params", process_json(e.cell.process)},
            {"n", e.cell.n},
            {"k", e.cell.k()},
            {"ratio", e.cell.ratio},
            {"rho", e.cell.rho},
            {"h", e.cell.h},
            {"beta0", e.cell.beta0},
            {"reps", e.reps},
            {"rejections", e.rejections},
            {"degenerate", e.degenerate},
            {"rate", e.rate},
            {"mc_std_err", e.mc_std_err},
        });
    return json{
        {"schema_version", kSchemaVersion},
        {"metadata",
         {{"base_seed", t.meta.base_seed},
          {"reps", t.meta.reps},
          {"alpha", t.meta.alpha},
          {"alternative", std::string(to_string(t.meta.alternative))},
          {"beta0", t.meta.beta0},
          {"software_version", t.meta.software_version},
          {"degenerate_policy",
           "degenerate replications are excluded from the rate; a cell fails above 1%"}}},
        {"cells", cells},
    };
}

std::string format_outcome(const TestOutcome& o, const Hypothesis& hyp, OutputFormat fmt) {
    switch (fmt) {
    case OutputFormat::json:
        return to_json(o, hyp).dump(2) + "\n";
    case OutputFormat::csv:
        return "statistic,p_value,reject,n,k,trace_sigma2,trace_sbar,mode,beta0,alpha,alternative\n" +
               format_double(o.statistic) + "," + format_double(o.p_value) + "," +
               (o.reject ? "true" : "false") + "," + std::to_string(o.n) + "," +
               std::to_string(o.k) + "," + format_double(o.trace_sigma2) + "," +
               format_double(o.trace_sbar) + "," + std::string(to_string(o.mode)) + "," +
               format_double(hyp.beta0) + "," + format_double(hyp.alpha) + "," +
               std::string(to_string(hyp.alternative)) + "\n";
    case OutputFormat::markdown: {
        std::ostringstream out;
        out << "| field | value |\n|---|---|\n"
            << "| statistic | " << format_double(o.statistic) << " |\n"
            << "| p_value | " << format_double(o.p_value) << " |\n"
            << "| reject | " << (o.reject ? "yes" : "no") << " |\n"
            << "| n | " << o.n << " |\n| k | " << o.k << " |\n"
            << "| trace_sigma2 | " << format_double(o.trace_sigma2) << " |\n"
            << "| trace_sbar | " << format_double(o.trace_sbar) << " |\n"
            << "| mode | " << to_string(o.mode) << " |\n"
            << "| beta0 | " << format_double(hyp.beta0) << " |\n"
            << "| alpha | " << format_double(hyp.alpha) << " |\n"
            << "| alternative | " << to_string(hyp.alternative) << " |\n";
        return out.str();
    }
    }
    return {};
}

std::string format_table(const RejectionTable& t, OutputFormat fmt) {
    switch (fmt) {
    case OutputFormat::json:
        return to_json(t).dump(2) + "\n";
    case OutputFormat::csv: {
        std::ostringstream out;
        out << "process,n,k,ratio,rho,h,beta0,reps,rejections,degenerate,rate,mc_std_err\n";
        for (const auto& e : t.entries)
            out << process_label(e.cell.process) << ',' << e.cell.n << ',' << e.cell.k() << ','
                << format_double(e.cell.ratio) << ',' << format_double(e.cell.rho) << ','
                << format_double(e.cell.h) << ',' << format_double(e.cell.beta0) << ','
                << e.reps << ',' << e.rejections << ',' << e.degenerate << ','
                << format_double(e.rate) << ',' << format_double(e.mc_std_err) << '\n';
        return out.str();
    }
    case OutputFormat::markdown:
        return table_markdown(t);
    }
    return {};
}

std::string format_intervals(const std::vector<Interval>& intervals, const BetaGrid& grid,
                             double alpha, Alternative alternative, OutputFormat fmt) {
    switch (fmt) {
    case OutputFormat::json: {
        json arr = json::array();
        for (const auto& iv : intervals)
            arr.push_back({iv.lo, iv.hi});
        return json{{"schema_version", kSchemaVersion},
                    {"intervals", arr},
                    {"grid", {{"lo", grid.lo}, {"hi", grid.hi}, {"steps", grid.steps}}},
                    {"alpha", alpha},
                    {"alternative", std::string(to_string(alternative))}}
                   .dump(2) +
               "\n";
    }
    case OutputFormat::csv: {
        std::string out = "lo,hi\n";
        for (const auto& iv : intervals)
            out += format_double(iv.lo) + "," + format_double(iv.hi) + "\n";
        return out;
    }
    case OutputFormat::markdown: {
        std::string out = "| lo | hi |\n|---:|---:|\n";
        for (const auto& iv : intervals)
            out += "| " + format_double(iv.lo) + " | " + format_double(iv.hi) + " |\n";
        if (intervals.empty())
            out += "| (empty) | |\n";
        return out;
    }
    }
    return {};
}

}  // namespace hdiv
