#pragma once

#include <stdexcept>
#include <string>

namespace nids {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SerializationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// thrown when a metric's denominator is empty (instead of returning NaN)
struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nids
