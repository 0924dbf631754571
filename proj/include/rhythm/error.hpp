#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rhythm {

/// Exception carrying a stable, kebab-case error code (e.g. "bad-magic").
/// The code is part of the public contract; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

} // namespace rhythm
