#include "birnn/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"

namespace birnn {

namespace {

template <class T>
T get(const json& j, const char* key)
{
    if (!j.contains(key))
        throw Error(ErrorKind::Io, std::string("missing JSON key '") + key + "'");
    return j.at(key).get<T>();
}

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m)
{
    json data = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            data.push_back(m(i, j));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

void matrix_from_json(const json& j, Eigen::Ref<Eigen::MatrixXd> m, std::string_view name)
{
    const auto rows = get<Eigen::Index>(j, "rows");
    const auto cols = get<Eigen::Index>(j, "cols");
    const auto& data = j.at("data");
    if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor " + std::string(name) + " has the wrong shape");
    Eigen::Index at = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = data.at(static_cast<std::size_t>(at++)).get<double>();
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t line)
{
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        if (cell == "nan" || cell == "NaN")
            return std::numeric_limits<double>::quiet_NaN();
        std::ostringstream os;
        os << path.string() << ':' << line << ": not a number: '" << cell << "'";
        throw Error(ErrorKind::Io, os.str());
    }
    return v;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

void to_json(json& j, const ModelParams& p)
{
    j = json{{"p0", p.p0}, {"p1", p.p1}, {"p2", p.p2}, {"p3", p.p3},
             {"p4", p.p4}, {"p5", p.p5}, {"G_b", p.G_b}, {"U_b", p.U_b}};
}

void from_json(const json& j, ModelParams& p)
{
    p.p0 = get<double>(j, "p0");
    p.p1 = get<double>(j, "p1");
    p.p2 = get<double>(j, "p2");
    p.p3 = get<double>(j, "p3");
    p.p4 = get<double>(j, "p4");
    p.p5 = get<double>(j, "p5");
    p.G_b = get<double>(j, "G_b");
    p.U_b = get<double>(j, "U_b");
}

void to_json(json& j, const ScenarioConfig& c)
{
    json meals = json::array();
    for (const auto& m : c.nominal_meals)
        meals.push_back({{"start_min", m.start}, {"size_g", m.size}, {"duration_min", m.duration}});
    j = json{{"days", c.days},
             {"nominal_meals", meals},
             {"time_jitter_min", c.time_jitter},
             {"size_jitter_frac", c.size_jitter},
             {"duration_jitter_min", c.duration_jitter},
             {"carb_ratio_g_per_u", c.carb_ratio},
             {"bolus_error_frac", c.bolus_error_range},
             {"bolus_delay_range_min", {c.bolus_delay_min, c.bolus_delay_max}},
             {"basal_rate_u_per_min", c.basal_rate},
             {"bolus_duration_min", c.bolus_duration},
             {"seed", c.seed}};
}

void from_json(const json& j, ScenarioConfig& c)
{
    c.days = get<int>(j, "days");
    c.nominal_meals.clear();
    for (const auto& m : j.at("nominal_meals"))
        c.nominal_meals.push_back({get<int>(m, "start_min"), get<double>(m, "size_g"), get<int>(m, "duration_min")});
    c.time_jitter = get<int>(j, "time_jitter_min");
    c.size_jitter = get<double>(j, "size_jitter_frac");
    c.duration_jitter = get<int>(j, "duration_jitter_min");
    c.carb_ratio = get<double>(j, "carb_ratio_g_per_u");
    c.bolus_error_range = get<double>(j, "bolus_error_frac");
    const auto delay = j.at("bolus_delay_range_min");
    c.bolus_delay_min = delay.at(0).get<int>();
    c.bolus_delay_max = delay.at(1).get<int>();
    c.basal_rate = get<double>(j, "basal_rate_u_per_min");
    c.bolus_duration = get_or<int>(j, "bolus_duration_min", 1);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
}

void to_json(json& j, const VirtualPatientConfig& c)
{
    j = json{{"base_params", c.base_params},
             {"circadian_amplitude_frac", c.circadian_amplitude},
             {"circadian_phase_min", c.circadian_phase},
             {"nonlinearity_gain", c.nonlinearity_gain},
             {"cgm_noise_std_mgdl", c.cgm_noise_std},
             {"seed", c.seed}};
}

void from_json(const json& j, VirtualPatientConfig& c)
{
    c.base_params = j.at("base_params").get<ModelParams>();
    c.circadian_amplitude = get<double>(j, "circadian_amplitude_frac");
    c.circadian_phase = get_or<double>(j, "circadian_phase_min", 0.0);
    c.nonlinearity_gain = get_or<double>(j, "nonlinearity_gain", 0.0);
    c.cgm_noise_std = get_or<double>(j, "cgm_noise_std_mgdl", 0.0);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
}

void to_json(json& j, const TrainConfig& c)
{
    j = json{{"eta", c.eta},
             {"kappa_max", c.kappa_max},
             {"kappa_val", c.kappa_val},
             {"rho_val", c.rho_val},
             {"alpha_D", c.weights.alpha_D},
             {"alpha_B", c.weights.alpha_B},
             {"alpha_A", c.weights.alpha_A},
             {"xi", c.weights.xi},
             {"seed", c.seed},
             {"n_hu", c.n_hu},
             {"clip_norm", c.clip_norm},
             {"adam_beta1", c.beta1},
             {"adam_beta2", c.beta2},
             {"adam_eps", c.adam_eps}};
}

void from_json(const json& j, TrainConfig& c)
{
    const TrainConfig d;
    c.eta = get_or(j, "eta", d.eta);
    c.kappa_max = get_or(j, "kappa_max", d.kappa_max);
    c.kappa_val = get_or(j, "kappa_val", d.kappa_val);
    c.rho_val = get_or(j, "rho_val", d.rho_val);
    c.weights.alpha_D = get_or(j, "alpha_D", d.weights.alpha_D);
    c.weights.alpha_B = get_or(j, "alpha_B", d.weights.alpha_B);
    c.weights.alpha_A = get_or(j, "alpha_A", d.weights.alpha_A);
    c.weights.xi = get_or(j, "xi", d.weights.xi);
    c.seed = get_or(j, "seed", d.seed);
    c.n_hu = get_or(j, "n_hu", d.n_hu);
    c.clip_norm = get_or(j, "clip_norm", d.clip_norm);
    c.beta1 = get_or(j, "adam_beta1", d.beta1);
    c.beta2 = get_or(j, "adam_beta2", d.beta2);
    c.adam_eps = get_or(j, "adam_eps", d.adam_eps);
}

void to_json(json& j, const Standardizer& s)
{
    j = json{{"channels", {"u", "r", "y1", "y2", "y3", "y4", "y5"}}, {"mean", s.mean}, {"std", s.std}};
}

void from_json(const json& j, Standardizer& s)
{
    s.mean = j.at("mean").get<std::array<double, kChannels>>();
    s.std = j.at("std").get<std::array<double, kChannels>>();
}

void to_json(json& j, const GruParams& p)
{
    j = json{{"n_u", p.n_u()}, {"n_hu", p.n_hu()}, {"n_y", p.n_y()}};
    p.for_each([&](std::string_view name, const Eigen::Ref<const Eigen::MatrixXd>& m) {
        j[std::string(name)] = matrix_json(m);
    });
}

void from_json(const json& j, GruParams& p)
{
    p = GruParams::zeros(get<int>(j, "n_hu"), get<int>(j, "n_u"), get<int>(j, "n_y"));
    p.for_each([&](std::string_view name, Eigen::Ref<Eigen::MatrixXd> m) {
        const std::string key(name);
        if (!j.contains(key))
            throw Error(ErrorKind::Io, "checkpoint lacks tensor " + key);
        matrix_from_json(j.at(key), m, name);
    });
    p.validate();
}

void to_json(json& j, const Checkpoint& c)
{
    j = json{{"format", kCheckpointFormat},
             {"n_hu", c.model.params.n_hu()},
             {"seed", c.config.seed},
             {"init", GruParams::init_scheme},
             {"train_config", c.config},
             {"standardizer", c.model.standardizer},
             {"model_params", c.model.model_params},
             {"params", c.model.params},
             {"best_iteration", c.best_iteration},
             {"best_val_mse", c.best_val_mse},
             {"stop_reason", c.stop_reason},
             {"config_hash", c.config_hash}};
}

void from_json(const json& j, Checkpoint& c)
{
    if (get<std::string>(j, "format") != kCheckpointFormat)
        throw Error(ErrorKind::Io, "unsupported checkpoint format");
    c.config = j.at("train_config").get<TrainConfig>();
    c.model.standardizer = j.at("standardizer").get<Standardizer>();
    c.model.model_params = j.at("model_params").get<ModelParams>();
    c.model.params = j.at("params").get<GruParams>();
    c.best_iteration = get_or(j, "best_iteration", 0);
    c.best_val_mse = get_or(j, "best_val_mse", 0.0);
    c.stop_reason = get_or<std::string>(j, "stop_reason", "");
    c.config_hash = get_or<std::string>(j, "config_hash", "");
}

json scenario_log(const ScenarioConfig& config, const Scenario& scenario)
{
    json meals = json::array();
    for (const auto& m : scenario.meal_log) {
        meals.push_back({{"day", m.day},
                         {"start_min_of_day", m.event.start},
                         {"absolute_start_min", m.absolute_start},
                         {"size_g", m.event.size},
                         {"duration_min", m.event.duration},
                         {"nominal", {{"start_min", m.nominal.start},
                                      {"size_g", m.nominal.size},
                                      {"duration_min", m.nominal.duration}}},
                         {"draws", {{"time_offset_min", m.time_offset},
                                    {"size_factor", m.size_factor},
                                    {"duration_offset_min", m.duration_offset},
                                    {"day_redraws", m.redraws}}}});
    }
    json boluses = json::array();
    for (const auto& b : scenario.bolus_log) {
        boluses.push_back({{"time_min", b.event.time},
                           {"amount_u", b.event.amount},
                           {"delay_after_meal_min", b.event.delay_after_meal},
                           {"meal", b.meal},
                           {"draws", {{"perceived_size_g", b.perceived_size},
                                      {"estimate_factor", b.estimate_factor}}}});
    }
    return json{{"prng", Rng::algorithm}, {"config", config}, {"meals", meals}, {"boluses", boluses}};
}

json report_json(const EvalReport& report, const std::string& hash)
{
    json patients = json::array();
    for (const auto& p : report.patients) {
        patients.push_back({{"id", p.id},
                            {"rmse_birnn_mgdl", p.rmse_birnn},
                            {"rmse_linear_mgdl", p.rmse_linear},
                            {"gof_birnn_pct", p.gof_birnn},
                            {"gof_linear_pct", p.gof_linear},
                            {"gof_skipped_samples", p.gof_skipped}});
    }
    auto summary = [](const MetricSummary& s) { return json{{"median", s.median}, {"p25", s.p25}, {"p75", s.p75}}; };
    return json{{"config_hash", hash},
                {"percentile_method", "linear interpolation at rank q*(n-1)"},
                {"patients", patients},
                {"cohort", {{"rmse_birnn_mgdl", summary(report.rmse_birnn)},
                            {"rmse_linear_mgdl", summary(report.rmse_linear)},
                            {"gof_birnn_pct", summary(report.gof_birnn)},
                            {"gof_linear_pct", summary(report.gof_linear)},
                            {"birnn_gof_wins", report.birnn_gof_wins},
                            {"patients", report.patients.size()}}}};
}

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string config_hash(const json& config)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
}

void write_json(const std::filesystem::path& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

std::vector<double> CsvTable::column(const std::string& name) const
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
        throw Error(ErrorKind::Io, "CSV has no column '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back(r.at(idx));
    return out;
}

CsvTable read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw Error(ErrorKind::Io, path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells)
            row.push_back(parse_double(c, path, lineno));
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty())
        throw Error(ErrorKind::Io, path.string() + ": missing CSV header");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path, const std::vector<std::string>& expected_header)
{
    CsvTable t = read_csv(path);
    if (t.header.size() < expected_header.size() ||
        !std::equal(expected_header.begin(), expected_header.end(), t.header.begin()))
        throw Error(ErrorKind::Io, path.string() + ": unexpected CSV header");
    return t;
}

std::string to_csv(const CsvTable& table, const std::string& comment)
{
    std::string out;
    if (!comment.empty())
        out += "# " + comment + "\n";
    for (std::size_t i = 0; i < table.header.size(); ++i)
        out += (i ? "," : "") + table.header[i];
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i)
                out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

CsvTable scenario_csv(std::span<const ModelInput> inputs)
{
    CsvTable t{{"t_min", "u", "r"}, {}};
    for (std::size_t k = 0; k < inputs.size(); ++k)
        t.rows.push_back({static_cast<double>(k), inputs[k].u, inputs[k].r});
    return t;
}

std::vector<ModelInput> inputs_from_csv(const CsvTable& table)
{
    const auto u = table.column("u");
    const auto r = table.column("r");
    std::vector<ModelInput> out(u.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        out[k] = {u[k], r[k]};
    return out;
}

CsvTable trace_csv(const GroundTruthTrace& trace)
{
    CsvTable t{{"t_min", "glucose_meas", "y1", "y2", "y3", "y4", "y5", "p2_eff"}, {}};
    for (std::size_t k = 0; k < trace.states.size(); ++k) {
        const auto& y = trace.states[k];
        t.rows.push_back({static_cast<double>(k), trace.measured_glucose[k], y(0), y(1), y(2), y(3), y(4),
                          trace.p2_trace[k]});
    }
    return t;
}

GroundTruthTrace trace_from_csv(const CsvTable& table)
{
    GroundTruthTrace tr;
    tr.measured_glucose = table.column("glucose_meas");
    tr.p2_trace = table.column("p2_eff");
    std::array<std::vector<double>, kStates> cols;
    for (int j = 0; j < kStates; ++j)
        cols[j] = table.column("y" + std::to_string(j + 1));
    tr.states.resize(tr.measured_glucose.size());
    for (std::size_t k = 0; k < tr.states.size(); ++k)
        for (int j = 0; j < kStates; ++j)
            tr.states[k](j) = cols[j][k];
    return tr;
}

CsvTable trajectory_csv(std::span<const State> states, std::span<const ModelInput> inputs, const ModelParams& p)
{
    if (states.size() != inputs.size())
        throw Error(ErrorKind::ShapeMismatch, "trajectory states and inputs differ in length");
    CsvTable t{{"t_min", "y1", "y2", "y3", "y4", "y5", "u", "r", "iob", "ra"}, {}};
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& y = states[k];
        t.rows.push_back({static_cast<double>(k), y(0), y(1), y(2), y(3), y(4), inputs[k].u, inputs[k].r,
                          iob(y, p), ra(y, p)});
    }
    return t;
}

CsvTable history_csv(std::span<const HistoryRow> history)
{
    CsvTable t{{"iter", "loss", "L_D", "L_B", "L_A", "val_mse", "clipped"}, {}};
    for (const auto& h : history)
        t.rows.push_back({static_cast<double>(h.iter), h.loss, h.L_D, h.L_B, h.L_A, h.val_mse, h.clipped ? 1.0 : 0.0});
    return t;
}

CsvTable comparison_csv(const ComparisonTrace& tr)
{
    CsvTable t{{"t_min", "glucose_true", "glucose_birnn", "glucose_linear", "iob_true", "iob_birnn", "iob_linear",
                "ra_true", "ra_birnn", "ra_linear"},
               {}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto at = [&](const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : nan; };
    for (std::size_t k = 0; k < tr.glucose_birnn.size(); ++k) {
        t.rows.push_back({static_cast<double>(k), at(tr.glucose_true, k), tr.glucose_birnn[k], tr.glucose_linear[k],
                          at(tr.iob_true, k), tr.iob_birnn[k], tr.iob_linear[k], at(tr.ra_true, k), tr.ra_birnn[k],
                          tr.ra_linear[k]});
    }
    return t;
}

} // namespace birnn
