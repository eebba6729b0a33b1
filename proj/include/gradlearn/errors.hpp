#pragma once

#include <stdexcept>
#include <string>

namespace gradlearn {

// Error taxonomy shared by the library and the command-line tool.  The CLI
// maps each category to a distinct process exit code, so library code should
// throw the most specific type that applies:
//
//   std::invalid_argument  -- caller violated a documented precondition
//                             (dimension mismatch, bad parameter range)
//   DataFormatError        -- a file or byte stream is malformed
//   NumericalError         -- a numerical procedure failed (singular system,
//                             non-PSD matrix after jitter escalation, ...)

class DataFormatError : public std::runtime_error {
public:
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gradlearn
