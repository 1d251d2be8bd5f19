#include "rmvp/log.hpp"
#include "rmvp/parallel.hpp"

#include <atomic>
#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace rmvp {

namespace {
std::atomic<int> g_workers{1};

std::shared_ptr<spdlog::logger> logger() {
    static auto instance = [] {
        auto l = spdlog::stderr_color_mt("rmvp");
        l->set_pattern("[%l] %v");
        l->set_level(spdlog::level::warn);
        return l;
    }();
    return instance;
}
}  // namespace

int worker_count() { return g_workers.load(); }
void set_worker_count(int workers) { g_workers.store(workers < 1 ? 1 : workers); }

namespace log {

void init_from_env() {
    const char* env = std::getenv("RMVP_LOG");
    if (env == nullptr) return;
    logger()->set_level(spdlog::level::from_str(env));
}

void debug(const std::string& msg) { logger()->debug(msg); }
void info(const std::string& msg) { logger()->info(msg); }
void warn(const std::string& msg) { logger()->warn(msg); }
void error(const std::string& msg) { logger()->error(msg); }

}  // namespace log
}  // namespace rmvp
