#include "core/rng.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mmgan {

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_ << " " << (has_spare_ ? 1 : 0);
    if (has_spare_) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), " %a", spare_);
        os << buf;
    }
    return os.str();
}

Rng Rng::deserialize(const std::string& state) {
    Rng rng(0);
    std::istringstream is(state);
    is >> rng.engine_;
    int has = 0;
    is >> has;
    rng.has_spare_ = has != 0;
    if (rng.has_spare_) {
        std::string hex;
        is >> hex;
        rng.spare_ = std::strtod(hex.c_str(), nullptr);
    }
    if (is.fail()) throw std::runtime_error("Rng::deserialize: malformed state string");
    return rng;
}

} // namespace mmgan
