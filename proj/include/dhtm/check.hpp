#pragma once

#include <stdexcept>
#include <string>

namespace dhtm {

inline void check_arg(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void check_state(bool cond, const std::string& msg) {
    if (!cond) throw std::logic_error(msg);
}

}  // namespace dhtm
