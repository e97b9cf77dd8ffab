#pragma once

#include <stdexcept>
#include <string>

namespace ergofix {

/// Argument outside an operation's contract (variant mismatch, bad sizes, n = 0).
class invalid_argument_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A point lies outside the domain C beyond tolerance.
class domain_error : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite arithmetic or quadrature failure.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Should be unreachable when inputs satisfy their invariants.
class internal_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace ergofix
