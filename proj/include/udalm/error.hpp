#pragma once

#include <stdexcept>
#include <string>

namespace udalm {

// Invalid configuration value or combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data that does not match what an operation expects (shapes, sizes).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure while reading a manifest, image, checkpoint or record file.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace udalm
