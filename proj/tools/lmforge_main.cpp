// lmforge: generate labeled lateral-movement telemetry at desk scale.
// Exit codes: 0 ok, 1 usage, 2 data error, 3 pid collisions under --strict.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lmforge/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "run";
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> end_extension_ms;
    std::optional<std::int64_t> slack_ms;
    std::vector<std::string> c2_endpoints;
    bool strict = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run config JSON (defaults are built in)");
    cmd->add_option("--out", opts.out_dir, "run directory for artifacts");
    cmd->add_option("--seed", opts.seed, "seed override (else config, else LMFORGE_SEED)");
    cmd->add_option("--end-extension-ms", opts.end_extension_ms,
                    "window end extension for forest construction");
    cmd->add_option("--slack-ms", opts.slack_ms, "flow window slack");
    cmd->add_option("--c2-endpoint", opts.c2_endpoints,
                    "orchestrator endpoint ip:port[-port] to filter (repeatable)");
    cmd->add_flag("--strict", opts.strict, "exit 3 when pid collision reports exist");
}

lmforge::RunConfig resolve_config(const CommonOpts& opts) {
    lmforge::RunConfig cfg = lmforge::default_config();
    bool config_has_seed = false;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw lmforge::LmError("cannot open config " + opts.config_path);
        nlohmann::json raw = nlohmann::json::parse(in);
        config_has_seed = raw.contains("seed");
        cfg = lmforge::run_config_from_json(raw);
    }
    // flags win over config; env var is the fallback seed
    if (opts.seed) {
        cfg.seed = *opts.seed;
    } else if (!config_has_seed) {
        if (const char* env = std::getenv("LMFORGE_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
    }
    if (opts.end_extension_ms) cfg.end_extension_ms = *opts.end_extension_ms;
    if (opts.slack_ms) cfg.slack_ms = *opts.slack_ms;
    if (!opts.c2_endpoints.empty()) {
        cfg.c2_filter.clear();
        for (const auto& spec : opts.c2_endpoints)
            cfg.c2_filter.push_back(lmforge::parse_c2_endpoint(spec));
    }
    if (opts.strict) cfg.strict = true;
    return cfg;
}

int strict_status(const lmforge::RunConfig& cfg, std::size_t collisions) {
    if (cfg.strict && collisions > 0) {
        std::cerr << "strict: " << collisions << " pid collision report(s) present\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"labeled lateral-movement dataset toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* schedule = app.add_subcommand("schedule", "generate per-employee session schedules");
    auto* emit = app.add_subcommand("emit", "emit benign, attack and C2 telemetry streams");
    auto* merge = app.add_subcommand("merge", "merge streams into events.jsonl and synthesize pcaps");
    auto* forest = app.add_subcommand("forest", "build the attack-steps forest");
    auto* label_sys = app.add_subcommand("label-sys", "label system logs against the forest");
    auto* label_net = app.add_subcommand("label-net", "label 5156 events, derive flows, filter C2");
    auto* label_pcap = app.add_subcommand("label-pcap", "label pcap packets against flows");
    auto* report = app.add_subcommand("report", "write dataset statistics (CSV + SVG)");
    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    for (auto* cmd : {schedule, emit, merge, forest, label_sys, label_net, label_pcap, report, pipeline})
        add_common(cmd, opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors are exit 1, --help stays 0
    }

    try {
        lmforge::RunConfig cfg = resolve_config(opts);
        const std::filesystem::path out = opts.out_dir;
        if (schedule->parsed()) {
            lmforge::stage_schedule(cfg, out);
        } else if (emit->parsed()) {
            lmforge::stage_emit(cfg, out);
        } else if (merge->parsed()) {
            lmforge::stage_merge(cfg, out);
        } else if (forest->parsed()) {
            lmforge::stage_forest(cfg, out);
        } else if (label_sys->parsed()) {
            std::size_t collisions = lmforge::stage_label_sys(cfg, out);
            return strict_status(cfg, collisions);
        } else if (label_net->parsed()) {
            std::size_t removed = lmforge::stage_label_net(cfg, out);
            std::cout << "c2_removed=" << removed << '\n';
        } else if (label_pcap->parsed()) {
            lmforge::stage_label_pcap(cfg, out);
        } else if (report->parsed()) {
            lmforge::stage_report(cfg, out);
        } else if (pipeline->parsed()) {
            lmforge::RunManifest m = lmforge::run_pipeline(cfg, out);
            std::cout << lmforge::manifest_to_json(m).dump(2) << '\n';
            return strict_status(cfg, m.pid_collisions);
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    }
    return 0;
}
