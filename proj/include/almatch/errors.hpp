#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace almatch {

/// Invalid configuration; field() is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace almatch
