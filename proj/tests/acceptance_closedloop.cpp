// Closed-loop acceptance: the Basal-Bolus reference controller survives a
// full month on the default adult, and the command-line pipeline is
// byte-for-byte deterministic. Takes the CLI binary path as argv[1].

#include "glucoloop/harness.hpp"
#include "glucoloop/report.hpp"

#include "acceptance_util.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace glucoloop;
using acceptance::check;
using acceptance::num;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <glucoloop-cli-binary>\n", argv[0]);
        return 2;
    }
    const std::string cli = argv[1];

    acceptance::Suite suite;

    suite.criterion(5, "Basal-Bolus closed loop: 30/30 completed days, TIR >= 60% on the default adult", 120.0,
                    [](std::vector<acceptance::Suite::Check>& checks) {
        const KvFile kv = KvFile::parse_string(
            "profile_id = adult#001\n"
            "agent = bb\n"
            "episodes = 30\n"
            "seed = 1\n");
        const ExperimentConfig config = parse_experiment_config(kv);
        const RunResult result = train_and_evaluate(config);

        check(checks, result.metrics.eval_window == 30, "evaluation window covers all 30 episodes");
        check(checks, result.metrics.eval_completed == 30,
              num(result.metrics.eval_completed) + "/30 episodes completed (need 30/30)");
        const double tir = result.metrics.tir_pct ? *result.metrics.tir_pct : 0.0;
        check(checks, tir >= 60.0, "time in range " + num(tir) + "% (need >= 60%)");
    });

    suite.criterion(9, "determinism: repeated CLI runs of one config are byte-identical", 60.0,
                    [&cli](std::vector<acceptance::Suite::Check>& checks) {
        const fs::path work = "acceptance_c9";
        fs::remove_all(work);
        fs::create_directories(work);

        // A planning run with CGM noise, so the comparison covers the meal
        // sampler, the sensor, the ensemble, and the planner end to end.
        const fs::path cfg_path = work / "exp.cfg";
        {
            std::ofstream cfg(cfg_path);
            cfg << "profile_id = adult#001\n"
                   "agent = mbrl_with_uncertainty\n"
                   "episodes = 8\n"
                   "warmup_episodes = 2\n"
                   "ensemble_members = 3\n"
                   "horizon = 16\n"
                   "seed = 33\n"
                   "cgm_noise_std = 2.0\n"
                   "cgm_noise_correlation = 0.9\n"
                   "esn.reservoir_size = 48\n"
                   "esn.washout = 8\n"
                << "output_dir = " << (work / "out").string() << "\n";
        }

        const std::string command = "\"" + cli + "\" -q run -c \"" + cfg_path.string() + "\"";
        check(checks, std::system(command.c_str()) == 0, "first CLI run exits 0");
        fs::rename(work / "out", work / "first");
        check(checks, std::system(command.c_str()) == 0, "second CLI run exits 0");

        std::vector<fs::path> names;
        for (const auto& entry : fs::directory_iterator(work / "first"))
            names.push_back(entry.path().filename());
        std::sort(names.begin(), names.end());
        check(checks, names.size() == 9, num(static_cast<double>(names.size())) +
                                             " artifacts written (8 episode logs + metrics)");

        bool all_equal = !names.empty();
        for (const auto& name : names) {
            if (!fs::exists(work / "out" / name)) {
                all_equal = false;
                check(checks, false, "missing from second run: " + name.string());
                continue;
            }
            if (slurp(work / "first" / name) != slurp(work / "out" / name)) {
                all_equal = false;
                check(checks, false, "byte mismatch: " + name.string());
            }
        }
        check(checks, all_equal, "all artifacts byte-identical across runs");

        // The run must actually have planned: a late episode log carries
        // chosen-multiplier entries.
        const std::string late = slurp(work / "first" / "episode_008.csv");
        bool planned = false;
        std::istringstream in(late);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            const auto second_last_comma = line.rfind(',', line.rfind(',') - 1);
            if (line.rfind(',') != std::string::npos && second_last_comma != std::string::npos &&
                line.rfind(',') - second_last_comma > 1)
                planned = true;
        }
        check(checks, planned, "final episode log records planner actions");
        fs::remove_all(work);
    });

    return suite.exit_code();
}
