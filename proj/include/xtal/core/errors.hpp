// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace xtal {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownElementError : public Error {
public:
    explicit UnknownElementError(const std::string& symbol)
        : Error("unknown element symbol '" + symbol + "'"), symbol_(symbol) {}
    const std::string& symbol() const noexcept { return symbol_; }

private:
    std::string symbol_;
};

class DegenerateLatticeError : public Error {
public:
    using Error::Error;
};

class ReductionError : public Error {
public:
    using Error::Error;
};

class FormulaError : public Error {
public:
    using Error::Error;
};

/// Refusal to run a combinatorial search past its size guard. Distinct from a
/// negative answer.
class GuardError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Input text that could not be parsed; line is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

} // namespace xtal
