// Command-line front end: run one experiment, sweep profiles x agents,
// aggregate metrics into summary tables, or produce the paired
// with/without-uncertainty learning curves.

#include "glucoloop/harness.hpp"
#include "glucoloop/report.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace glucoloop;

namespace {

std::string episode_filename(int episode, int total) {
    int width = 3;
    for (int v = total; v >= 1000 && width < 9; v /= 10) ++width;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "episode_%0*d.csv", width, episode);
    return buf;
}

void write_run_outputs(const fs::path& dir, const RunResult& result) {
    fs::create_directories(dir);
    const int total = static_cast<int>(result.logs.size());
    for (int i = 0; i < total; ++i)
        write_episode_csv((dir / episode_filename(i + 1, total)).string(), result.logs[static_cast<std::size_t>(i)]);
    write_metrics_json((dir / "metrics.json").string(), result.metrics);
}

EpisodeCallback progress_printer(bool quiet, const std::string& label, int total) {
    if (quiet) return {};
    return [label, total](int ep, const EpisodeLog& log) {
        if (ep % 10 == 0 || ep == total || !log.completed())
            std::cerr << label << " episode " << ep << "/" << total << ": " << log.duration_steps
                      << " steps, " << to_string(log.termination) << ", TIR "
                      << format_fixed(log.tir_pct(), 1) << "%\n";
    };
}

int cmd_run(const std::string& config_path, bool quiet) {
    const ExperimentConfig config = parse_experiment_config(KvFile::parse_file(config_path), ConfigMode::run);
    const RunSetup setup = resolve_setup(config);
    const auto result = train_and_evaluate(
        setup, progress_printer(quiet, setup.config.profile_id + "/" + to_string(config.agent),
                                config.resolved_episodes()));
    write_run_outputs(config.output_dir, result);
    std::cout << "profile " << result.metrics.profile_id << ", agent " << result.metrics.agent
              << ", episodes " << result.metrics.episodes << "\n"
              << "completion " << format_fixed(result.metrics.completion_rate_pct, 1) << "% over last "
              << result.metrics.eval_window << " episodes\n"
              << "time in range "
              << (result.metrics.tir_pct ? format_fixed(*result.metrics.tir_pct, 1) + "%" : std::string("n/a"))
              << " over last " << result.metrics.tir_episodes_used << " completed episodes\n"
              << "outputs in " << config.output_dir << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, bool quiet) {
    const ExperimentConfig base = parse_experiment_config(KvFile::parse_file(config_path), ConfigMode::sweep);
    std::vector<MetricsReport> reports;
    for (const auto& profile : base.sweep_profiles) {
        for (const AgentKind agent : base.sweep_agents) {
            ExperimentConfig c = base;
            c.profile_id = profile;
            c.agent = agent;
            std::string cell = profile + "__" + to_string(agent);
            for (auto& ch : cell)
                if (ch == '#') ch = '_';
            c.output_dir = (fs::path(base.output_dir) / cell).string();
            const RunSetup setup = resolve_setup(c);
            const auto result =
                train_and_evaluate(setup, progress_printer(quiet, cell, c.resolved_episodes()));
            write_run_outputs(c.output_dir, result);
            reports.push_back(result.metrics);
        }
    }
    const std::string tables = render_tables(reports);
    std::cout << tables;
    std::ofstream out(fs::path(base.output_dir) / "summary.txt");
    out << tables;
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs) {
    std::vector<MetricsReport> reports;
    for (const auto& input : inputs) {
        if (fs::is_directory(input)) {
            for (const auto& entry : fs::recursive_directory_iterator(input))
                if (entry.is_regular_file() && entry.path().filename() == "metrics.json")
                    reports.push_back(read_metrics_json(entry.path().string()));
        } else {
            reports.push_back(read_metrics_json(input));
        }
    }
    if (reports.empty()) throw ConfigError("report: no metrics files found in the given inputs");
    std::cout << render_tables(reports);
    return 0;
}

int cmd_curves(const std::string& config_path, bool quiet) {
    const ExperimentConfig base = parse_experiment_config(KvFile::parse_file(config_path), ConfigMode::curves);
    int run_no = 0;
    CurvesResult curves = compare_uncertainty_modes(
        base, quiet ? EpisodeCallback{} : [&run_no, &base](int ep, const EpisodeLog& log) {
            if (ep == 1) ++run_no;
            if (ep % 50 == 0 || !log.completed())
                std::cerr << "run " << run_no << "/" << 2 * base.curve_seeds << " episode " << ep << ": "
                          << log.duration_steps << " steps\n";
        });
    fs::create_directories(base.output_dir);
    {
        std::ofstream out(fs::path(base.output_dir) / "curves.csv");
        if (!out) throw std::runtime_error("cannot open curves.csv for write");
        write_curves_csv(out, curves);
    }
    {
        std::ofstream out(fs::path(base.output_dir) / "curves_summary.json");
        if (!out) throw std::runtime_error("cannot open curves_summary.json for write");
        out << curves_summary_json(curves).dump(2) << '\n';
    }
    std::cout << "median first full episode: with uncertainty "
              << format_fixed(curves.median_first_full_with, 1) << ", without "
              << format_fixed(curves.median_first_full_without, 1) << "\n"
              << "outputs in " << base.output_dir << "\n";
    return 0;
}

int cmd_profiles(const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (const AgeGroup group : {AgeGroup::adult, AgeGroup::adolescent, AgeGroup::child}) {
        for (int index = 1; index <= 3; ++index) {
            const PatientParams p = make_profile(group, index);
            const BbParams bb = derive_bb_params(p);
            std::string name = p.profile_id;
            for (auto& ch : name)
                if (ch == '#') ch = '_';
            std::ofstream out(fs::path(out_dir) / (name + ".profile"));
            if (!out) throw std::runtime_error("cannot write profile file for " + p.profile_id);
            write_profile_file(out, p, bb);
        }
    }
    std::cout << "wrote 9 profile files to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"glucoloop: closed-loop glucose control workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> report_inputs;
    std::string profiles_out = "data/profiles";
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress per-episode progress on stderr");

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("-c,--config", config_path, "experiment config file")->required();

    auto* sweep = app.add_subcommand("sweep", "run every profile x agent cell of a sweep config");
    sweep->add_option("-c,--config", config_path, "sweep config file (with profiles/agents lists)")->required();

    auto* report = app.add_subcommand("report", "aggregate metrics.json files into summary tables");
    report->add_option("inputs", report_inputs, "metrics.json files or directories to scan")->required();

    auto* curves = app.add_subcommand("curves", "paired with/without-uncertainty learning curves");
    curves->add_option("-c,--config", config_path, "curves config file")->required();

    auto* profiles = app.add_subcommand("profiles", "write the built-in virtual-person profile files");
    profiles->add_option("-o,--out", profiles_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, quiet);
        if (sweep->parsed()) return cmd_sweep(config_path, quiet);
        if (report->parsed()) return cmd_report(report_inputs);
        if (curves->parsed()) return cmd_curves(config_path, quiet);
        if (profiles->parsed()) return cmd_profiles(profiles_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
