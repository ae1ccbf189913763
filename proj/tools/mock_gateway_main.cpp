#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "comaguard/errors.hpp"
#include "comaguard/gateway.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) {
    g_interrupted.store(true);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scriptable stand-in for a telephony gateway (POST /notify, GET /requests, POST /script)"};
    std::string host = "127.0.0.1";
    int port = 9090;
    std::string script_path;
    std::string default_behavior = "fail";
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    app.add_option("--script", script_path, "JSON script: {\"default\": {...}, \"numbers\": {...}}");
    app.add_option("--default", default_behavior, "Behavior when no script entry matches")
        ->check(CLI::IsMember({"deliver", "fail"}));
    CLI11_PARSE(app, argc, argv);

    comaguard::MockGateway::Script script;
    try {
        if (!script_path.empty()) {
            std::ifstream in(script_path);
            if (!in) throw comaguard::Error("cannot open '" + script_path + "'");
            script = comaguard::MockGateway::script_from_json(nlohmann::json::parse(in));
        } else {
            script.fallback.kind = default_behavior == "deliver" ? comaguard::MockGateway::Behavior::Kind::Deliver
                                                                 : comaguard::MockGateway::Behavior::Kind::Fail;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    comaguard::MockGateway gateway(script);
    const int bound = gateway.start(host, port);
    if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << '\n';
        return 2;
    }
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cout << "mock gateway on " << gateway.base_url() << std::endl;
    while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    gateway.stop();
    return 0;
}
