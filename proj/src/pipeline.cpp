#include "birnn/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>

#include "birnn/error.hpp"
#include "birnn/rng.hpp"

namespace birnn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSplits[] = {"train", "val", "test"};

template <class T>
T get_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void log(Stage stage, const std::string& msg)
{
    std::clog << '[' << to_string(stage) << "] " << msg << std::endl;
}

std::string stamp(const std::string& hash, std::uint64_t seed)
{
    return "config_hash=" + hash + " seed=" + std::to_string(seed);
}

std::vector<VirtualPatientConfig> load_cohort(const fs::path& data_dir, int size)
{
    std::vector<VirtualPatientConfig> cohort;
    for (int i = 0; i < size; ++i) {
        const fs::path f = data_dir / patient_id(i) / "patient.json";
        if (!fs::exists(f))
            throw Error(ErrorKind::Io, "missing " + f.string() + "; run the generate stage first");
        cohort.push_back(read_json(f).at("patient").get<VirtualPatientConfig>());
    }
    return cohort;
}

const ScenarioConfig& split_config(const Protocols& p, const std::string& split)
{
    if (split == "train")
        return p.train;
    if (split == "val")
        return p.validation;
    return p.test;
}

Episode load_episode(const fs::path& patient_dir, const std::string& split, const ModelParams& p)
{
    MeasuredSequence m = load_measured(patient_dir, split);
    return make_episode(std::move(m.inputs), std::move(m.glucose), p);
}

} // namespace

void to_json(json& j, const ExperimentConfig& c)
{
    j = json{{"name", c.name},
             {"cohort", {{"size", c.cohort.size},
                         {"spread_frac", c.cohort.spread},
                         {"seed", c.cohort.seed},
                         {"nominal", c.cohort.nominal}}},
             {"individualize_therapy", c.individualize_therapy},
             {"protocols", {{"train", c.protocols.train},
                            {"validation", c.protocols.validation},
                            {"test", c.protocols.test}}},
             {"rls", {{"ridge", c.ridge},
                      {"fasting_window_min", c.rls.fasting_window},
                      {"min_time_constant_min", c.rls.min_time_constant},
                      {"max_time_constant_min", c.rls.max_time_constant},
                      {"max_iterations", c.rls.max_iterations}}},
             {"train", c.train},
             {"paths", {{"data", c.paths.data},
                        {"linear", c.paths.linear},
                        {"checkpoints", c.paths.checkpoints},
                        {"report", c.paths.report}}}};
}

void from_json(const json& j, ExperimentConfig& c)
{
    c = ExperimentConfig{};
    c.name = get_or<std::string>(j, "name", c.name);
    const auto& cohort = j.at("cohort");
    c.cohort.size = get_or(cohort, "size", c.cohort.size);
    c.cohort.spread = get_or(cohort, "spread_frac", c.cohort.spread);
    c.cohort.seed = cohort.at("seed").get<std::uint64_t>();
    c.cohort.nominal = cohort.at("nominal").get<VirtualPatientConfig>();
    c.individualize_therapy = get_or(j, "individualize_therapy", c.individualize_therapy);
    const auto& prot = j.at("protocols");
    c.protocols.train = prot.at("train").get<ScenarioConfig>();
    c.protocols.validation = prot.at("validation").get<ScenarioConfig>();
    c.protocols.test = prot.at("test").get<ScenarioConfig>();
    if (j.contains("rls")) {
        const auto& r = j.at("rls");
        c.ridge = get_or(r, "ridge", c.ridge);
        c.rls.fasting_window = get_or(r, "fasting_window_min", c.rls.fasting_window);
        c.rls.min_time_constant = get_or(r, "min_time_constant_min", c.rls.min_time_constant);
        c.rls.max_time_constant = get_or(r, "max_time_constant_min", c.rls.max_time_constant);
        c.rls.max_iterations = get_or(r, "max_iterations", c.rls.max_iterations);
    }
    c.train = j.at("train").get<TrainConfig>();
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        c.paths.data = get_or(p, "data", c.paths.data);
        c.paths.linear = get_or(p, "linear", c.paths.linear);
        c.paths.checkpoints = get_or(p, "checkpoints", c.paths.checkpoints);
        c.paths.report = get_or(p, "report", c.paths.report);
    }
    for (const auto* sc : {&c.protocols.train, &c.protocols.validation, &c.protocols.test})
        sc->validate();
    c.train.validate();
}

Stage parse_stage(const std::string& name)
{
    for (Stage s : {Stage::Generate, Stage::Simulate, Stage::FitLinear, Stage::Train, Stage::Evaluate})
        if (to_string(s) == name)
            return s;
    throw Error(ErrorKind::InvalidConfig, "unknown stage '" + name + "'");
}

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::Generate: return "generate";
    case Stage::Simulate: return "simulate";
    case Stage::FitLinear: return "fit-linear";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
    }
    return "?";
}

std::string patient_id(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "patient_%02d", index + 1);
    return buf;
}

std::string experiment_hash(const ExperimentConfig& config)
{
    return config_hash(json(config));
}

Protocols patient_protocols(const ExperimentConfig& config, const VirtualPatientConfig& patient)
{
    Protocols p = config.protocols;
    if (config.individualize_therapy) {
        const auto& bp = patient.base_params;
        for (auto* sc : {&p.train, &p.validation, &p.test}) {
            sc->basal_rate = bp.U_b;
            sc->carb_ratio = bp.p2 / bp.p3;
        }
    }
    return p;
}

MeasuredSequence load_measured(const fs::path& patient_dir, const std::string& split)
{
    const fs::path inputs = patient_dir / (split + "_inputs.csv");
    const fs::path trace = patient_dir / (split + "_trace.csv");
    if (!fs::exists(inputs) || !fs::exists(trace))
        throw Error(ErrorKind::Io, "missing " + split + " data in " + patient_dir.string());
    MeasuredSequence m;
    m.inputs = inputs_from_csv(read_csv(inputs, {"t_min", "u", "r"}));
    m.glucose = read_csv(trace, {"t_min", "glucose_meas"}).column("glucose_meas");
    if (m.inputs.size() != m.glucose.size())
        throw Error(ErrorKind::ShapeMismatch, "inputs and trace lengths differ in " + patient_dir.string());
    return m;
}

std::vector<State> load_true_states(const fs::path& patient_dir, const std::string& split)
{
    return trace_from_csv(read_csv(patient_dir / (split + "_trace.csv"))).states;
}

void check_provenance(const std::vector<std::string>& hashes, bool force)
{
    const std::set<std::string> distinct(hashes.begin(), hashes.end());
    if (distinct.size() > 1 && !force)
        throw Error(ErrorKind::ProvenanceMismatch,
                    "artifacts come from different configurations (use --force to override)");
}

PipelineResult evaluate_directories(const fs::path& ckpts, const fs::path& linear, const fs::path& data,
                                    const fs::path& out_dir, bool force)
{
    if (!fs::is_directory(ckpts) || !fs::is_directory(linear) || !fs::is_directory(data))
        throw Error(ErrorKind::Io, "evaluate needs existing checkpoint, linear and data directories");
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(ckpts))
        if (entry.path().extension() == ".json")
            ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty())
        throw Error(ErrorKind::EmptyInput, "no checkpoints in " + ckpts.string());

    std::vector<BirnnModel> models;
    std::vector<ModelParams> fits;
    std::vector<PatientTestData> tests;
    std::vector<std::string> hashes;
    for (const auto& id : ids) {
        const Checkpoint ck = read_json(ckpts / (id + ".json")).get<Checkpoint>();
        hashes.push_back(ck.config_hash);
        models.push_back(ck.model);

        const fs::path lin = linear / (id + ".json");
        if (!fs::exists(lin))
            throw Error(ErrorKind::PatientCountMismatch, "no linear fit for " + id);
        const json lj = read_json(lin);
        hashes.push_back(get_or<std::string>(lj, "config_hash", ""));
        fits.push_back(lj.get<ModelParams>());

        const fs::path pdir = data / id;
        if (!fs::is_directory(pdir))
            throw Error(ErrorKind::PatientCountMismatch, "no test data for " + id);
        const json pj = read_json(pdir / "patient.json");
        hashes.push_back(get_or<std::string>(pj, "config_hash", ""));
        PatientTestData t;
        t.id = id;
        MeasuredSequence m = load_measured(pdir, "test");
        t.inputs = std::move(m.inputs);
        t.glucose_meas = std::move(m.glucose);
        t.true_states = load_true_states(pdir, "test");
        t.true_params = pj.at("patient").at("base_params").get<ModelParams>();
        tests.push_back(std::move(t));
    }
    check_provenance(hashes, force);
    const bool mixed = std::set<std::string>(hashes.begin(), hashes.end()).size() > 1;
    const std::string hash = mixed ? "mixed" : hashes.front();

    PipelineResult res;
    res.config_hash = hash;
    res.report = evaluate_cohort(models, fits, tests);
    res.report_json = report_json(res.report, hash);
    write_json(out_dir / "report.json", res.report_json);
    for (const auto& p : res.report.patients)
        write_text(out_dir / "traces" / (p.id + ".csv"), to_csv(comparison_csv(p.trace), "config_hash=" + hash));
    return res;
}

PipelineResult run_pipeline(const ExperimentConfig& config, const fs::path& out_dir, Stage first)
{
    const std::string hash = experiment_hash(config);
    const fs::path data_dir = out_dir / config.paths.data;
    const fs::path linear_dir = out_dir / config.paths.linear;
    const fs::path ckpt_dir = out_dir / config.paths.checkpoints;
    const fs::path report_dir = out_dir / config.paths.report;
    const int n = config.cohort.size;

    Stage current = first;
    auto run = [&](Stage stage, auto&& body) {
        if (stage < first)
            return;
        current = stage;
        body();
    };

    try {
        write_json(out_dir / "config.json", json{{"config_hash", hash}, {"config", config}});

        run(Stage::Generate, [&] {
            const auto cohort = make_cohort(config.cohort);
            for (int i = 0; i < n; ++i) {
                const fs::path pdir = data_dir / patient_id(i);
                write_json(pdir / "patient.json", json{{"config_hash", hash}, {"patient", cohort[i]}});
                const Protocols prot = patient_protocols(config, cohort[i]);
                for (const std::string split : kSplits) {
                    const ScenarioConfig& sc = split_config(prot, split);
                    const Scenario scenario = generate_scenario(sc);
                    write_text(pdir / (split + "_inputs.csv"),
                               to_csv(scenario_csv(scenario.inputs), stamp(hash, sc.seed)));
                    json log = scenario_log(sc, scenario);
                    log["config_hash"] = hash;
                    write_json(pdir / (split + "_events.json"), log);
                }
            }
            log(Stage::Generate, std::to_string(n) + " patients");
        });

        run(Stage::Simulate, [&] {
            const auto cohort = load_cohort(data_dir, n);
            for (int i = 0; i < n; ++i) {
                const fs::path pdir = data_dir / patient_id(i);
                for (const std::string split : kSplits) {
                    VirtualPatientConfig vp = cohort[i];
                    vp.seed = derive_seed(cohort[i].seed, split);
                    const auto inputs = inputs_from_csv(read_csv(pdir / (split + "_inputs.csv"), {"t_min", "u", "r"}));
                    const GroundTruthTrace trace = simulate_patient(vp, inputs);
                    write_text(pdir / (split + "_trace.csv"), to_csv(trace_csv(trace), stamp(hash, vp.seed)));
                }
            }
            log(Stage::Simulate, "ground-truth traces written");
        });

        run(Stage::FitLinear, [&] {
            for (int i = 0; i < n; ++i) {
                const std::vector<MeasuredSequence> train{load_measured(data_dir / patient_id(i), "train")};
                RlsDiagnostics diag;
                const ModelParams p = fit_rls(train, 1.0, config.ridge, config.rls, &diag);
                json j = p;
                j["config_hash"] = hash;
                write_json(linear_dir / (patient_id(i) + ".json"), j);
                log(Stage::FitLinear, patient_id(i) + ": cost " + format_double(diag.cost));
            }
        });

        run(Stage::Train, [&] {
            if (!fs::is_directory(data_dir))
                throw Error(ErrorKind::Io, "data directory " + data_dir.string() + " does not exist");
            for (int i = 0; i < n; ++i) {
                const std::string id = patient_id(i);
                const fs::path lin = linear_dir / (id + ".json");
                if (!fs::exists(lin))
                    throw Error(ErrorKind::Io, "missing linear fit " + lin.string());
                const ModelParams p = read_json(lin).get<ModelParams>();
                const std::vector<Episode> train_eps{load_episode(data_dir / id, "train", p)};
                const std::vector<Episode> val_eps{load_episode(data_dir / id, "val", p)};
                TrainConfig tc = config.train;
                tc.seed = derive_seed(config.train.seed, id);
                const TrainResult res = train(tc, train_eps, val_eps, p);

                Checkpoint ck;
                ck.model = {res.best, res.standardizer, p};
                ck.config = tc;
                ck.best_iteration = res.best_iteration;
                ck.best_val_mse = res.best_val_mse;
                ck.stop_reason = res.stop_reason;
                ck.config_hash = hash;
                write_json(ckpt_dir / (id + ".json"), ck);
                write_text(ckpt_dir / "history" / (id + ".csv"), to_csv(history_csv(res.history), stamp(hash, tc.seed)));
                log(Stage::Train, id + ": best val MSE " + format_double(res.best_val_mse) + " at iteration " +
                                      std::to_string(res.best_iteration) + " (" + res.stop_reason + ")");
            }
        });

        PipelineResult result;
        run(Stage::Evaluate, [&] {
            result = evaluate_directories(ckpt_dir, linear_dir, data_dir, report_dir, false);
            log(Stage::Evaluate, "BI-RNN GoF wins: " + std::to_string(result.report.birnn_gof_wins) + "/" +
                                     std::to_string(result.report.patients.size()));
        });
        return result;
    } catch (const Error& e) {
        throw Error(e.kind(), "stage " + std::string(to_string(current)) + ": " + e.detail());
    } catch (const std::exception& e) {
        throw Error(ErrorKind::Io, "stage " + std::string(to_string(current)) + ": " + e.what());
    }
}

} // namespace birnn
