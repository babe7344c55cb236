#pragma once

#include <stdexcept>
#include <string>

namespace ttc {

// All contract violations (bad shapes, rank bounds, mismatched bases, ...)
// surface as ttc::Error so callers and the CLI can catch one type.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

} // namespace ttc
