#ifndef CLM_ERRORS_HPP
#define CLM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

#include "clm/vec.hpp"

namespace clm {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnboundedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Solver gave up before hitting tolerance; carries the best iterate found.
struct NonConvergenceError : std::runtime_error {
    Vec best_point;
    double best_value;
    NonConvergenceError(std::string msg, Vec point, double value)
        : std::runtime_error(std::move(msg)),
          best_point(std::move(point)),
          best_value(value) {}
};

struct RejectedBidError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleMeanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(std::string msg, int line_no)
        : std::runtime_error(std::move(msg)), line(line_no) {}
};

struct IssuanceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScheduleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RescaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace clm

#endif
