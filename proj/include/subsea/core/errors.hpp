#pragma once

#include <stdexcept>
#include <string>

namespace subsea {

/// Argument dimensions do not chain or match.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller violated a documented precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite values reached a numerical routine.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A gain-flattening filter was asked to amplify: the worst channel lacks headroom.
class InfeasibleError : public std::runtime_error {
public:
    InfeasibleError(int channel, double shortfall_db)
        : std::runtime_error("GFF infeasible: channel " + std::to_string(channel) + " is " +
                             std::to_string(shortfall_db) + " dB below target"),
          channel_(channel),
          shortfall_db_(shortfall_db) {}

    int channel() const noexcept { return channel_; }
    double shortfall_db() const noexcept { return shortfall_db_; }

private:
    int channel_;
    double shortfall_db_;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace subsea
