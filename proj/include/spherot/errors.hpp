#pragma once

#include <stdexcept>
#include <string>

namespace spherot {

struct CutLocusError : std::runtime_error {
    explicit CutLocusError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateBody : std::runtime_error {
    explicit DegenerateBody(const std::string& what) : std::runtime_error(what) {}
};

struct SectionEscapesChart : std::runtime_error {
    explicit SectionEscapesChart(const std::string& what) : std::runtime_error(what) {}
};

struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace spherot
