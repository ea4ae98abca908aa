#include <filesystem>

#include <gtest/gtest.h>

#include "birnn/error.hpp"
#include "birnn/io.hpp"
#include "test_support.hpp"

using namespace birnn;
using namespace birnn::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("birnn_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Io, FormatDoubleRoundTrips)
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.125, 1e-8})
        EXPECT_EQ(std::stod(format_double(v)), v);
    EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Io, ConfigHashIsStable)
{
    const json a = nominal_protocols().train;
    EXPECT_EQ(config_hash(a), config_hash(json(nominal_protocols().train)));
    EXPECT_EQ(config_hash(a).size(), 16u);
    json b = a;
    b["seed"] = 1;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Io, ConfigsRoundTrip)
{
    const ScenarioConfig sc = nominal_protocols().validation;
    EXPECT_EQ(json(sc).get<ScenarioConfig>(), sc);
    VirtualPatientConfig vp = linear_patient(nominal(), 5);
    vp.circadian_amplitude = 0.3;
    vp.nonlinearity_gain = 0.1;
    EXPECT_EQ(json(vp).get<VirtualPatientConfig>(), vp);
    EXPECT_EQ(json(nominal()).get<ModelParams>(), nominal());
    EXPECT_TRUE(json(vp).contains("cgm_noise_std_mgdl"));
}

TEST(Io, CheckpointRoundTrip)
{
    Checkpoint ck;
    ck.model.params = init_params(4, 9);
    ck.model.params.b_y << 0.1, 0.2, 0.3, 0.4, 1.0 / 3.0;
    const std::vector<Episode> eps{short_episode(nominal(), 20)};
    ck.model.standardizer = fit_standardizer(eps);
    ck.model.model_params = nominal();
    ck.config.n_hu = 4;
    ck.best_iteration = 35;
    ck.best_val_mse = 0.123;
    ck.stop_reason = "patience";
    ck.config_hash = "abc";
    const fs::path f = scratch("ckpt") / "c.json";
    write_json(f, ck);
    const json j = read_json(f);
    EXPECT_EQ(j.at("format"), kCheckpointFormat);
    const Checkpoint back = j.get<Checkpoint>();
    EXPECT_EQ(back.model.params.flatten(), ck.model.params.flatten());
    EXPECT_EQ(back.model.standardizer, ck.model.standardizer);
    EXPECT_EQ(back.model.model_params, ck.model.model_params);
    EXPECT_EQ(back.best_iteration, 35);
    EXPECT_EQ(back.stop_reason, "patience");
    EXPECT_EQ(back.config_hash, "abc");

    json broken = j;
    broken["params"]["W_r"]["rows"] = 5;
    EXPECT_THROW(broken.get<Checkpoint>(), Error);
}

TEST(Io, CsvRoundTripWithComment)
{
    const Scenario sc = generate_scenario(one_day(4));
    const fs::path f = scratch("csv") / "inputs.csv";
    write_text(f, to_csv(scenario_csv(sc.inputs), "config_hash=0123"));
    const CsvTable t = read_csv(f, {"t_min", "u", "r"});
    EXPECT_EQ(inputs_from_csv(t), sc.inputs);
    EXPECT_THROW(read_csv(f, {"t_min", "glucose_meas"}), Error);
    EXPECT_THROW(read_csv(f.parent_path() / "missing.csv"), Error);
}

TEST(Io, TraceRoundTrip)
{
    VirtualPatientConfig vp = linear_patient(nominal(), 2);
    vp.cgm_noise_std = 3.0;
    vp.circadian_amplitude = 0.2;
    const GroundTruthTrace tr = simulate_patient(vp, generate_scenario(one_day(5)));
    const fs::path f = scratch("trace") / "trace.csv";
    write_text(f, to_csv(trace_csv(tr)));
    const GroundTruthTrace back = trace_from_csv(read_csv(f));
    EXPECT_EQ(back.measured_glucose, tr.measured_glucose);
    EXPECT_EQ(back.p2_trace, tr.p2_trace);
    ASSERT_EQ(back.states.size(), tr.states.size());
    EXPECT_EQ(back.states[700], tr.states[700]);
}

TEST(Io, TrajectoryColumns)
{
    const ModelParams p = nominal();
    const std::vector<ModelInput> in(3, ModelInput{p.U_b, 0.0});
    const CsvTable t = trajectory_csv(linear_states(p, in), in, p);
    const std::vector<std::string> header{"t_min", "y1", "y2", "y3", "y4", "y5", "u", "r", "iob", "ra"};
    EXPECT_EQ(t.header, header);
    EXPECT_NEAR(t.column("iob")[1], p.p4 * 2 * p.U_b, 1e-12);
}
