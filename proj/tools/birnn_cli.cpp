#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "birnn/error.hpp"
#include "birnn/evaluation.hpp"
#include "birnn/io.hpp"
#include "birnn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace birnn;

namespace {

int cmd_generate(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed)
{
    auto config = read_json(config_path).get<ScenarioConfig>();
    if (seed)
        config.seed = *seed;
    const Scenario scenario = generate_scenario(config);
    const std::string hash = config_hash(json(config));
    write_text(out / "inputs.csv", to_csv(scenario_csv(scenario.inputs), "config_hash=" + hash + " seed=" +
                                                                                std::to_string(config.seed)));
    json log = scenario_log(config, scenario);
    log["config_hash"] = hash;
    write_json(out / "events.json", log);
    return 0;
}

int cmd_simulate(const fs::path& patient, const fs::path& scenario, const fs::path& out)
{
    const auto config = read_json(patient).get<VirtualPatientConfig>();
    const auto inputs = inputs_from_csv(read_csv(scenario, {"t_min", "u", "r"}));
    const GroundTruthTrace trace = simulate_patient(config, inputs);
    write_text(out, to_csv(trace_csv(trace), "config_hash=" + config_hash(json(config)) +
                                                 " seed=" + std::to_string(config.seed)));
    return 0;
}

int cmd_fit_linear(const std::vector<std::string>& inputs, const std::vector<std::string>& traces, double ridge,
                   const fs::path& out)
{
    if (inputs.size() != traces.size())
        throw Error(ErrorKind::InvalidConfig, "--inputs and --trace must be given the same number of times");
    std::vector<MeasuredSequence> episodes;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        MeasuredSequence m;
        m.inputs = inputs_from_csv(read_csv(inputs[i], {"t_min", "u", "r"}));
        m.glucose = read_csv(traces[i], {"t_min", "glucose_meas"}).column("glucose_meas");
        episodes.push_back(std::move(m));
    }
    RlsDiagnostics diag;
    const ModelParams p = fit_rls(episodes, 1.0, ridge, RlsOptions{}, &diag);
    json j = p;
    j["cost"] = diag.cost;
    j["iterations"] = diag.iterations;
    write_json(out, j);
    return 0;
}

int cmd_train(const fs::path& data, const fs::path& params_path, const fs::path& config_path, const fs::path& out,
              const std::string& history)
{
    const ModelParams p = read_json(params_path).get<ModelParams>();
    const TrainConfig config = read_json(config_path).get<TrainConfig>();
    config.validate();
    auto episode = [&](const std::string& split) {
        MeasuredSequence m = load_measured(data, split);
        return make_episode(std::move(m.inputs), std::move(m.glucose), p);
    };
    const std::vector<Episode> train_eps{episode("train")};
    const std::vector<Episode> val_eps{episode("val")};
    const TrainResult res = train(config, train_eps, val_eps, p);

    Checkpoint ck;
    ck.model = {res.best, res.standardizer, p};
    ck.config = config;
    ck.best_iteration = res.best_iteration;
    ck.best_val_mse = res.best_val_mse;
    ck.stop_reason = res.stop_reason;
    ck.config_hash = config_hash(json{{"train", config}, {"params", p}});
    write_json(out, ck);
    if (!history.empty())
        write_text(history, to_csv(history_csv(res.history), "config_hash=" + ck.config_hash));
    std::cout << "best val MSE " << format_double(res.best_val_mse) << " at iteration " << res.best_iteration
              << " (" << res.stop_reason << ")\n";
    return 0;
}

int cmd_evaluate(const fs::path& ckpts, const fs::path& linear, const fs::path& data, const fs::path& out, bool force)
{
    const PipelineResult res = evaluate_directories(ckpts, linear, data, out, force);
    const auto& r = res.report;
    std::cout << "median GoF BI-RNN " << format_double(r.gof_birnn.median) << ", linear "
              << format_double(r.gof_linear.median) << "; BI-RNN wins " << r.birnn_gof_wins << "/"
              << r.patients.size() << "\n";
    return 0;
}

int cmd_simulate_model(const std::string& ckpt, const std::string& params, const fs::path& inputs_path,
                       const fs::path& out)
{
    const auto inputs = inputs_from_csv(read_csv(inputs_path, {"t_min", "u", "r"}));
    std::vector<State> states;
    ModelParams p;
    if (!ckpt.empty()) {
        const Checkpoint ck = read_json(ckpt).get<Checkpoint>();
        p = ck.model.model_params;
        const Eigen::MatrixXd Y = ck.model.predict(inputs);
        for (Eigen::Index k = 0; k < Y.cols(); ++k)
            states.push_back(Y.col(k));
    } else {
        p = read_json(params).get<ModelParams>();
        states = linear_states(p, inputs);
    }
    write_text(out, to_csv(trajectory_csv(states, inputs, p)));
    return 0;
}

int cmd_run(const fs::path& config_path, const fs::path& out, const std::string& stage)
{
    const auto config = read_json(config_path).get<ExperimentConfig>();
    const PipelineResult res = run_pipeline(config, out, parse_stage(stage));
    const auto& r = res.report;
    std::cout << "config " << res.config_hash << ": median GoF BI-RNN " << format_double(r.gof_birnn.median)
              << ", linear " << format_double(r.gof_linear.median) << "; BI-RNN wins " << r.birnn_gof_wins << "/"
              << r.patients.size() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"BI-RNN glucose modeling experiments"};
    app.require_subcommand(1);

    std::string config, out, patient, scenario, data, params, ckpts, linear, history, ckpt, inputs_csv;
    std::string stage = "generate";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs, traces;
    double ridge = 1e-6;
    bool force = false;

    auto* gen = app.add_subcommand("generate", "Generate a meal/insulin scenario");
    gen->add_option("--config", config, "ScenarioConfig JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_option("--seed", seed, "Override the scenario seed");

    auto* sim = app.add_subcommand("simulate", "Simulate a surrogate patient on a scenario");
    sim->add_option("--patient", patient, "VirtualPatientConfig JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--scenario", scenario, "Scenario inputs CSV")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "Output trace CSV")->required();

    auto* fit = app.add_subcommand("fit-linear", "Identify linear model parameters by regularized least squares");
    fit->add_option("--inputs", inputs, "Inputs CSV (repeatable)")->required()->check(CLI::ExistingFile);
    fit->add_option("--trace", traces, "Trace CSV with glucose_meas (repeatable)")->required()->check(CLI::ExistingFile);
    fit->add_option("--ridge", ridge, "Ridge weight");
    fit->add_option("--out", out, "Output parameter JSON")->required();

    auto* tr = app.add_subcommand("train", "Train a BI-RNN for one patient");
    tr->add_option("--data", data, "Patient data directory")->required();
    tr->add_option("--patient-params", params, "Identified ModelParams JSON")->required()->check(CLI::ExistingFile);
    tr->add_option("--config", config, "TrainConfig JSON")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", out, "Output checkpoint JSON")->required();
    tr->add_option("--history", history, "Training history CSV");

    auto* ev = app.add_subcommand("evaluate", "Compare BI-RNN checkpoints against linear fits on test data");
    ev->add_option("--ckpts", ckpts, "Checkpoint directory")->required();
    ev->add_option("--linear", linear, "Linear fit directory")->required();
    ev->add_option("--data", data, "Data directory")->required();
    ev->add_option("--out", out, "Report directory")->required();
    ev->add_flag("--force", force, "Accept artifacts with mismatched config hashes");

    auto* sm = app.add_subcommand("simulate-model", "Roll out a checkpoint or linear model on an input CSV");
    auto* ck_opt = sm->add_option("--ckpt", ckpt, "Checkpoint JSON")->check(CLI::ExistingFile);
    auto* par_opt = sm->add_option("--params", params, "ModelParams JSON")->check(CLI::ExistingFile);
    ck_opt->excludes(par_opt);
    sm->add_option("--inputs", inputs_csv, "Inputs CSV")->required()->check(CLI::ExistingFile);
    sm->add_option("--out", out, "Output trajectory CSV")->required();

    auto* run = app.add_subcommand("run", "Run the full experiment pipeline");
    run->add_option("--config", config, "ExperimentConfig JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--stage", stage, "First stage to run")
        ->check(CLI::IsMember({"generate", "simulate", "fit-linear", "train", "evaluate"}));

    try {
        app.parse(argc, argv);
        if (sm->parsed() && ckpt.empty() && params.empty())
            throw CLI::RequiredError("--ckpt or --params");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_generate(config, out, seed);
        if (sim->parsed())
            return cmd_simulate(patient, scenario, out);
        if (fit->parsed())
            return cmd_fit_linear(inputs, traces, ridge, out);
        if (tr->parsed())
            return cmd_train(data, params, config, out, history);
        if (ev->parsed())
            return cmd_evaluate(ckpts, linear, data, out, force);
        if (sm->parsed())
            return cmd_simulate_model(ckpt, params, inputs_csv, out);
        if (run->parsed())
            return cmd_run(config, out, stage);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
