#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bope/harness.hpp"

namespace {

int exit_code_for(const bope::Error& e) {
    if (dynamic_cast<const bope::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const bope::FileNotFound*>(&e) || dynamic_cast<const bope::ParseError*>(&e) ||
        dynamic_cast<const bope::SingleClass*>(&e) || dynamic_cast<const bope::TooFewRows*>(&e) ||
        dynamic_cast<const bope::NonFiniteValue*>(&e))
        return 3;
    return 1;
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& out, const std::optional<int>& threads) {
    bope::ExperimentConfig cfg = bope::parse_config_file(config_path);
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_path = *out;
    if (threads) {
        if (*threads < 1) throw bope::ConfigError("--threads must be at least 1");
        cfg.threads = *threads;
    }

    const bope::ExperimentResult result = bope::run_experiment(cfg);
    bope::write_report_files(result, cfg);

    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "dataset " << result.dataset_name << ", truth " << bope::format_number(result.truth);
    if (result.truth_se > 0.0) std::cout << " (mc se " << bope::format_number(result.truth_se) << ")";
    std::cout << "\nreport written to " << cfg.out_path << "\n";
    return 0;
}

int cmd_oracle(const std::string& preset, int n, std::uint64_t seed, const std::string& out) {
    const auto oracle = bope::load_oracle(preset);

    if (std::holds_alternative<bope::DiscreteOracle>(oracle)) {
        const auto& o = std::get<bope::DiscreteOracle>(oracle);
        std::cout << "oracle " << o.name << ": discrete, " << o.num_states() << " states, "
                  << o.num_actions() << " actions\n";
        std::cout << "true value " << bope::format_number(bope::true_value(o)) << "\n";
        if (!out.empty()) {
            const auto logged =
                bope::generate_logged(o, static_cast<std::size_t>(n), bope::RngSpec{seed, 0});
            std::ofstream f(out, std::ios::binary);
            if (!f) throw bope::FileNotFound("cannot write '" + out + "'");
            for (Eigen::Index j = 0; j < logged.dim(); ++j) f << "s" << j << ",";
            f << "action,reward\n";
            for (Eigen::Index i = 0; i < logged.n(); ++i) {
                for (Eigen::Index j = 0; j < logged.dim(); ++j)
                    f << bope::format_number(logged.states(i, j)) << ",";
                f << logged.actions[static_cast<std::size_t>(i)].index << ","
                  << bope::format_number(logged.rewards[i]) << "\n";
            }
            std::cout << n << " logged rows written to " << out << "\n";
        }
    } else {
        const auto& o = std::get<bope::ContinuousOracle>(oracle);
        std::cout << "oracle " << o.name << ": continuous\n";
        const auto mc = bope::true_value_mc(o, 1000000, bope::RngSpec{seed, 1});
        std::cout << "true value " << bope::format_number(mc.value) << " (mc se "
                  << bope::format_number(mc.se) << ")\n";
        if (!out.empty()) {
            const auto logged =
                bope::generate_logged(o, static_cast<std::size_t>(n), bope::RngSpec{seed, 0});
            std::ofstream f(out, std::ios::binary);
            if (!f) throw bope::FileNotFound("cannot write '" + out + "'");
            f << "s0,action,reward\n";
            for (Eigen::Index i = 0; i < logged.n(); ++i)
                f << bope::format_number(logged.states(i, 0)) << ","
                  << bope::format_number(logged.actions[static_cast<std::size_t>(i)].value) << ","
                  << bope::format_number(logged.rewards[i]) << "\n";
            std::cout << n << " logged rows written to " << out << "\n";
        }
    }
    return 0;
}

int cmd_report(const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) throw bope::FileNotFound("cannot open '" + in_path + "'");

    std::vector<std::vector<std::string>> table;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        table.push_back(std::move(fields));
    }
    if (table.empty()) throw bope::ParseError("empty report", 0, "");

    std::vector<std::size_t> widths;
    for (const auto& row : table) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], row[j].size());
    }
    for (const auto& row : table) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::printf("%-*s", static_cast<int>(widths[j] + 2), row[j].c_str());
        }
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"balanced off-policy evaluation for contextual bandits"};
    app.require_subcommand(1);

    std::string config_path, oracle_preset, report_in, oracle_out;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::optional<int> threads_override;
    std::uint64_t oracle_seed = 0;
    int oracle_n = 1000;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config path")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_override, "override the report output path");
    run->add_option("--threads", threads_override, "worker threads for replications");

    auto* oracle = app.add_subcommand("oracle", "inspect an oracle preset");
    oracle->add_option("--preset", oracle_preset, "preset name (p1, p2, p2_null, p3) or oracle config path")
        ->required();
    oracle->add_option("--n", oracle_n, "rows to generate with --out");
    oracle->add_option("--seed", oracle_seed, "generation seed");
    oracle->add_option("--out", oracle_out, "write a generated logged dataset CSV here");

    auto* report = app.add_subcommand("report", "pretty-print a report CSV");
    report->add_option("--in", report_in, "report file path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, seed_override, out_override, threads_override);
        if (oracle->parsed()) return cmd_oracle(oracle_preset, oracle_n, oracle_seed, oracle_out);
        if (report->parsed()) return cmd_report(report_in);
    } catch (const bope::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
