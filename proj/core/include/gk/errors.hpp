#pragma once

#include <stdexcept>
#include <string>

namespace gk {

// Error taxonomy mirrored by the CLI exit codes:
//   io_error / data_error  -> 2 (bad input, usage)
//   empty_result_error     -> 3
//   numeric_error          -> 4 (solver or conditioning failure)

class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

class empty_result_error : public std::runtime_error {
public:
    explicit empty_result_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Monomorphic or otherwise untestable variant.
class degenerate_variant_error : public data_error {
public:
    explicit degenerate_variant_error(const std::string& msg) : data_error(msg) {}
};

}
