#pragma once

#include <stdexcept>
#include <string>

namespace ofr {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A configuration value is out of its allowed range (bad count, bad
// temperature, infeasible fixture spec, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

// Inputs are individually well-formed but mutually inconsistent
// (dimension mismatch, missing score for a frame, ...).
class InputError : public Error {
public:
    using Error::Error;
};

// Content fails a semantic check (NaN in a payload, unknown class id,
// incomplete score coverage, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A file does not carry the expected magic or version.
class FormatError : public Error {
public:
    using Error::Error;
};

// A file is structurally damaged: truncated, trailing bytes, or a
// length that contradicts its header.
class CorruptionError : public Error {
public:
    using Error::Error;
};

// A path cannot be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace ofr
