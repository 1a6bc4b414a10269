#pragma once

#include <stdexcept>
#include <string>

namespace mdrift {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularityError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct RetractionError : Error { using Error::Error; };
struct DegenerateDataError : Error { using Error::Error; };
struct RankError : Error { using Error::Error; };

struct DivergenceError : Error {
    DivergenceError(const std::string& what, double t, double step)
        : Error(what), time(t), step_hint(step) {}
    double time;
    double step_hint;  // suggested smaller step
};

struct ConfigError : Error {
    ConfigError(std::string key, const std::string& msg)
        : Error(key + ": " + msg), key_path(std::move(key)) {}
    std::string key_path;
};

struct IoError : Error {
    IoError(const std::string& path, const std::string& msg) : Error(path + ": " + msg) {}
};

}  // namespace mdrift
