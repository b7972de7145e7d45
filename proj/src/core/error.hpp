#pragma once

#include <stdexcept>
#include <string>

namespace mvq {

// Error taxonomy matches the process exit codes: config=2, data=3, model=4.
enum class ErrorKind { Config, Data, Model };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Data:   return 3;
            case ErrorKind::Model:  return 4;
        }
        return 3;
    }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error data_error(const std::string& msg)   { return Error(ErrorKind::Data, msg); }
inline Error model_error(const std::string& msg)  { return Error(ErrorKind::Model, msg); }

}  // namespace mvq
