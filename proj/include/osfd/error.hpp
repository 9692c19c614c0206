#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace osfd {

/// Library-wide exception type. Anything thrown on a contract violation or
/// an unrecoverable runtime condition is an osfd::Error.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {
template <typename... Parts>
std::string concat(Parts&&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    return os.str();
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(Parts&&... parts) {
    throw Error(detail::concat(std::forward<Parts>(parts)...));
}

}  // namespace osfd

// Contract check: throws osfd::Error with a formatted message when cond is false.
#define OSFD_REQUIRE(cond, ...)                        \
    do {                                               \
        if (!(cond)) ::osfd::fail(__VA_ARGS__);        \
    } while (0)
