#pragma once

#include <string>

namespace rmvp::log {

// Thin wrapper so that only log.cpp pulls in spdlog. The level is taken from
// the RMVP_LOG environment variable (trace, debug, info, warn, error, off);
// default is warn.
void init_from_env();
void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

}  // namespace rmvp::log
