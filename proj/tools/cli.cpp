#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "comaguard/app_config.hpp"
#include "comaguard/gateway.hpp"
#include "comaguard/oracle.hpp"
#include "comaguard/scenario.hpp"
#include "comaguard/session_service.hpp"

namespace comaguard::cli {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) {
    g_interrupted.store(true);
}

AppConfig load_config(const std::string& path) {
    return path.empty() ? AppConfig{} : load_app_config(path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
    if (!f.flush()) throw Error("write to '" + path + "' failed");
}

std::string summarize(const EventLog& log) {
    std::size_t alarms = 0, escalations = 0, attempts = 0, acks = 0;
    StateKind final_state = StateKind::Idle;
    for (const auto& e : log) {
        if (std::holds_alternative<event::AlarmRaised>(e)) ++alarms;
        if (std::holds_alternative<event::EscalationStarted>(e)) ++escalations;
        if (std::holds_alternative<event::ContactAttempt>(e)) ++attempts;
        if (std::holds_alternative<event::AlarmAcknowledged>(e)) ++acks;
        if (const auto* s = std::get_if<event::StateChanged>(&e)) final_state = s->to;
    }
    std::ostringstream ss;
    ss << "events=" << log.size() << " alarms=" << alarms << " acknowledged=" << acks
       << " escalations=" << escalations << " attempts=" << attempts << " final_state=" << to_string(final_state);
    return ss.str();
}

struct RunArgs {
    std::string trace, config, out;
    double speed = std::numeric_limits<double>::infinity();
};

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto config = load_config(a.config);
        const auto trace = read_trace_file(a.trace);
        ReplayOptions options;
        options.speed = a.speed;
        options.tick_period_s = config.service.tick_period_s;
        const auto log = replay(trace, config.run, options);
        const bool to_stdout = a.out.empty() || a.out == "-";
        write_output(a.out, to_json_lines(log), out);
        (to_stdout ? err : out) << summarize(log) << '\n';
        return kOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
}

struct GenArgs {
    std::string kind, out;
    std::optional<std::int64_t> duration;
    std::uint64_t seed = 0;
    double hr_dropout = 0.0;
};

int cmd_gen(const GenArgs& a, std::ostream& out, std::ostream& err) {
    try {
        const auto kind = scenario_kind_from_string(a.kind);
        if (!kind) throw InvalidSpec("unknown kind '" + a.kind + "'");
        ScenarioSpec spec;
        spec.kind = *kind;
        spec.duration_s = a.duration.value_or(default_duration_s(*kind));
        spec.seed = a.seed;
        spec.hr_dropout = a.hr_dropout;
        write_output(a.out, write_trace(generate_scenario(spec)), out);
        return kOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
}

struct VerifyArgs {
    std::string trace, config, events;
    bool features = false;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
    AppConfig config;
    Trace trace;
    EventLog log;
    try {
        config = load_config(a.config);
        trace = read_trace_file(a.trace);
        log = event_log_from_json_lines(read_file(a.events));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    const auto result = oracle::verify_events(trace, config.run, log, config.service.tick_period_s);
    bool ok = result.pass();
    for (const auto& d : result.divergences) {
        out << "DIVERGENCE " << oracle::to_string(d.kind) << " at event " << d.index << ": " << d.detail << '\n';
    }
    if (a.features) {
        const auto mismatches = oracle::verify_features(trace, config.run.detection);
        for (const auto& m : mismatches) {
            out << "FEATURE MISMATCH at t_ms=" << m.t_ms << " " << m.field << ": " << m.detail << '\n';
        }
        ok = ok && mismatches.empty();
    }
    if (!ok) return kDivergence;
    out << "PASS " << log.size() << " events match the reference recomputation\n";
    return kOk;
}

struct ServeArgs {
    std::string config, host, gateway_url, data_dir;
    std::optional<int> port;
};

void use_stderr_logger() {
    if (!spdlog::get("comaguard")) spdlog::set_default_logger(spdlog::stderr_color_mt("comaguard"));
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    use_stderr_logger();
    AppConfig config;
    try {
        config = load_config(a.config);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    if (!a.host.empty()) config.service.host = a.host;
    if (a.port) config.service.port = *a.port;
    if (!a.data_dir.empty()) config.service.data_dir = a.data_dir;
    std::string url = config.service.gateway_url;
    if (const char* env = std::getenv("COMAGUARD_GATEWAY_URL"); env && *env) url = env;
    if (!a.gateway_url.empty()) url = a.gateway_url;
    config.service.gateway_url = url;
    const auto timeout = std::chrono::milliseconds(config.service.gateway_timeout_ms);

    SessionService service(config, [url, timeout](const std::string& id) {
        return std::make_unique<HttpGatewayNotifier>(url, id, timeout);
    });
    try {
        service.recover();
    } catch (const std::exception& e) {
        err << "error: cannot load sessions from '" << config.service.data_dir << "': " << e.what() << '\n';
        return kUsage;
    }
    HttpServer server(service);
    const int port = server.bind(config.service.host, config.service.port);
    if (port < 0) {
        err << "error: cannot bind " << config.service.host << ":" << config.service.port << " (port in use?)\n";
        return kUsage;
    }
    service.start_ticker();

    g_interrupted.store(false);
    auto old_int = std::signal(SIGINT, on_signal);
    auto old_term = std::signal(SIGTERM, on_signal);
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!done.load() && !g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server.stop();
    });

    out << "listening on http://" << config.service.host << ":" << port << " (gateway " << url << ")" << std::endl;
    const bool ok = server.listen();
    done.store(true);
    watcher.join();
    service.shutdown();
    std::signal(SIGINT, old_int);
    std::signal(SIGTERM, old_term);
    out << "stopped" << std::endl;
    return ok || g_interrupted.load() ? kOk : kUsage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coma-risk detector: replay traces, generate scenarios, verify logs, serve live sessions"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Replay a trace and write the event log (JSON Lines)");
    run->add_option("--trace", run_args.trace, "Trace CSV")->required();
    run->add_option("--config", run_args.config, "JSON config file");
    run->add_option("--speed", run_args.speed, "Logical-to-wall speed multiplier (default: unpaced)")
        ->check(CLI::PositiveNumber);
    run->add_option("--out", run_args.out, "Event log path (default: stdout)");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "Generate a scenario trace");
    gen->add_option("--kind", gen_args.kind,
                    "restful_sleep | exercise_then_rest | hypoglycemic_coma | hyperglycemic_coma | device_removed | "
                    "nightmare_false_positive")
        ->required();
    gen->add_option("--duration", gen_args.duration, "Seconds (default: the kind's full shape)");
    gen->add_option("--seed", gen_args.seed, "Noise seed");
    gen->add_option("--hr-dropout", gen_args.hr_dropout, "Probability of a missing HR reading");
    gen->add_option("--out", gen_args.out, "Trace path (default: stdout)");

    VerifyArgs verify_args;
    auto* verify = app.add_subcommand("verify", "Check an event log against the reference recomputation");
    verify->add_option("--trace", verify_args.trace, "Trace CSV")->required();
    verify->add_option("--config", verify_args.config, "JSON config file");
    verify->add_option("--events", verify_args.events, "Event log (JSON Lines)")->required();
    verify->add_flag("--features", verify_args.features, "Also compare streaming features sample by sample");

    ServeArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Serve the live session API");
    serve->add_option("--config", serve_args.config, "JSON config file");
    serve->add_option("--host", serve_args.host, "Bind address");
    serve->add_option("--port", serve_args.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--gateway-url", serve_args.gateway_url, "Telephony gateway base URL");
    serve->add_option("--data-dir", serve_args.data_dir, "Session persistence directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsage;
    }

    if (run->parsed()) return cmd_run(run_args, out, err);
    if (gen->parsed()) return cmd_gen(gen_args, out, err);
    if (verify->parsed()) return cmd_verify(verify_args, out, err);
    if (serve->parsed()) return cmd_serve(serve_args, out, err);
    return kUsage;
}

}  // namespace comaguard::cli
