#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "birnn/error.hpp"
#include "birnn/pipeline.hpp"
#include "test_support.hpp"

using namespace birnn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_experiment()
{
    ExperimentConfig c;
    c.name = "tiny";
    c.cohort.nominal = birnn::testing::linear_patient(nominal_patient_params(), 3);
    c.cohort.nominal.circadian_amplitude = 0.3;
    c.cohort.nominal.nonlinearity_gain = 0.1;
    c.cohort.nominal.cgm_noise_std = 2.0;
    c.cohort.size = 2;
    c.cohort.seed = 7;
    c.protocols = nominal_protocols();
    c.protocols.train.days = 1;
    c.protocols.validation.days = 1;
    c.protocols.test.days = 1;
    c.train.n_hu = 4;
    c.train.kappa_max = 10;
    c.train.seed = 5;
    return c;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("birnn_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& f)
{
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string first_line(const fs::path& f)
{
    std::ifstream in(f);
    std::string line;
    std::getline(in, line);
    return line;
}

} // namespace

TEST(Pipeline, ConfigRoundTrip)
{
    const ExperimentConfig c = tiny_experiment();
    const ExperimentConfig back = json(c).get<ExperimentConfig>();
    EXPECT_EQ(json(back).dump(), json(c).dump());
    EXPECT_EQ(experiment_hash(back), experiment_hash(c));
    EXPECT_EQ(parse_stage("fit-linear"), Stage::FitLinear);
    EXPECT_THROW(parse_stage("bogus"), Error);
    EXPECT_EQ(patient_id(0), "patient_01");
}

TEST(Pipeline, IndividualizedTherapyKeepsMealDraws)
{
    const ExperimentConfig c = tiny_experiment();
    const auto cohort = make_cohort(c.cohort);
    const Protocols a = patient_protocols(c, cohort[0]);
    const Protocols b = patient_protocols(c, cohort[1]);
    EXPECT_EQ(a.train.basal_rate, cohort[0].base_params.U_b);
    EXPECT_EQ(a.train.carb_ratio, cohort[0].base_params.p2 / cohort[0].base_params.p3);
    const Scenario sa = generate_scenario(a.train), sb = generate_scenario(b.train);
    ASSERT_EQ(sa.meal_log.size(), sb.meal_log.size());
    for (std::size_t i = 0; i < sa.meal_log.size(); ++i)
        EXPECT_EQ(sa.meal_log[i].event, sb.meal_log[i].event);
}

TEST(Pipeline, RunsEndToEndDeterministically)
{
    const ExperimentConfig c = tiny_experiment();
    const fs::path a = scratch("a"), b = scratch("b");
    const PipelineResult ra = run_pipeline(c, a);
    const PipelineResult rb = run_pipeline(c, b);
    ASSERT_EQ(ra.report.patients.size(), 2u);
    EXPECT_EQ(slurp(a / "report" / "report.json"), slurp(b / "report" / "report.json"));
    EXPECT_EQ(slurp(a / "ckpts" / "patient_02.json"), slurp(b / "ckpts" / "patient_02.json"));
    EXPECT_EQ(slurp(a / "report" / "traces" / "patient_01.csv"), slurp(b / "report" / "traces" / "patient_01.csv"));

    const std::string stamp = "# config_hash=" + ra.config_hash;
    for (const char* f : {"data/patient_01/train_inputs.csv", "data/patient_01/test_trace.csv",
                          "ckpts/history/patient_01.csv", "report/traces/patient_02.csv"})
        EXPECT_EQ(first_line(a / f).rfind(stamp, 0), 0u) << f;
    for (const char* f : {"data/patient_01/patient.json", "data/patient_02/val_events.json",
                          "linear/patient_01.json", "ckpts/patient_01.json", "report/report.json"})
        EXPECT_EQ(read_json(a / f).at("config_hash"), ra.config_hash) << f;

    // Idempotent re-run over the same directory.
    run_pipeline(c, a);
    EXPECT_EQ(slurp(a / "report" / "report.json"), slurp(b / "report" / "report.json"));
}

TEST(Pipeline, StageGatingReusesArtifacts)
{
    const ExperimentConfig c = tiny_experiment();
    const fs::path dir = scratch("gate");
    run_pipeline(c, dir);
    const std::string report = slurp(dir / "report" / "report.json");
    fs::remove_all(dir / "report");
    fs::remove(dir / "data" / "patient_01" / "train_events.json");
    run_pipeline(c, dir, Stage::Evaluate);
    EXPECT_EQ(slurp(dir / "report" / "report.json"), report);
    EXPECT_FALSE(fs::exists(dir / "data" / "patient_01" / "train_events.json"));
}

TEST(Pipeline, MissingDataNamesTheStage)
{
    const fs::path dir = scratch("missing");
    try {
        run_pipeline(tiny_experiment(), dir, Stage::Train);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("stage train"), std::string::npos) << e.what();
    }
}

TEST(Pipeline, MixedProvenanceNeedsForce)
{
    ExperimentConfig c = tiny_experiment();
    const fs::path dir = scratch("mixed");
    run_pipeline(c, dir);
    json lin = read_json(dir / "linear" / "patient_02.json");
    lin["config_hash"] = "0000000000000000";
    write_json(dir / "linear" / "patient_02.json", lin);
    try {
        evaluate_directories(dir / "ckpts", dir / "linear", dir / "data", dir / "out", false);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ProvenanceMismatch);
    }
    const PipelineResult r = evaluate_directories(dir / "ckpts", dir / "linear", dir / "data", dir / "out", true);
    EXPECT_EQ(r.config_hash, "mixed");
}

namespace {

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(BIRNN_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST(Cli, HelpAndUsageExitCodes)
{
    EXPECT_EQ(run_cli("--help"), 0);
    for (const char* sub : {"generate", "simulate", "fit-linear", "train", "evaluate", "simulate-model", "run"})
        EXPECT_EQ(run_cli(std::string(sub) + " --help"), 0) << sub;
    EXPECT_EQ(run_cli("generate --bogus 1"), 2);
    EXPECT_EQ(run_cli(""), 2);
    EXPECT_EQ(run_cli("nonsense"), 2);
}

TEST(Cli, FitLinearRecoversGenerator)
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const ModelParams p = birnn::testing::nominal();
    ScenarioConfig sc = birnn::testing::one_day(12, 3);
    write_json(dir / "scenario.json", sc);
    ASSERT_EQ(run_cli("generate --config " + (dir / "scenario.json").string() + " --out " + (dir / "gen").string() +
                      " --seed 44"),
              0);
    write_json(dir / "patient.json", birnn::testing::linear_patient(p));
    ASSERT_EQ(run_cli("simulate --patient " + (dir / "patient.json").string() + " --scenario " +
                      (dir / "gen" / "inputs.csv").string() + " --out " + (dir / "trace.csv").string()),
              0);
    ASSERT_EQ(run_cli("fit-linear --inputs " + (dir / "gen" / "inputs.csv").string() + " --trace " +
                      (dir / "trace.csv").string() + " --ridge 1e-12 --out " + (dir / "fit.json").string()),
              0);
    const ModelParams fit = read_json(dir / "fit.json").get<ModelParams>();
    for (auto f : {&ModelParams::p0, &ModelParams::p1, &ModelParams::p2, &ModelParams::p3, &ModelParams::p4,
                   &ModelParams::p5})
        EXPECT_NEAR(fit.*f / p.*f, 1.0, 0.01);
    EXPECT_EQ(read_json(dir / "gen" / "events.json").at("config").at("seed"), 44);

    ASSERT_EQ(run_cli("simulate-model --params " + (dir / "fit.json").string() + " --inputs " +
                      (dir / "gen" / "inputs.csv").string() + " --out " + (dir / "traj.csv").string()),
              0);
    EXPECT_EQ(read_csv(dir / "traj.csv").rows.size(), 3u * 1440u);
    EXPECT_EQ(run_cli("simulate --patient " + (dir / "missing.json").string() + " --scenario " +
                      (dir / "gen" / "inputs.csv").string() + " --out x.csv"),
              2);
    EXPECT_EQ(run_cli("evaluate --ckpts " + (dir / "none").string() + " --linear x --data y --out z"), 1);
}
