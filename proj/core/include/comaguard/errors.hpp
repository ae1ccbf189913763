#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace comaguard {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// signal-features
class WindowTooSmall : public Error {
public:
    WindowTooSmall() : Error("window needs at least 2 samples") {}
};

class InvalidTimestamps : public Error {
public:
    InvalidTimestamps() : Error("timestamps must be strictly increasing") {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& what) : Error("insufficient data: " + what) {}
};

class BaselineMissing : public Error {
public:
    BaselineMissing() : Error("baselines not established") {}
};

// detection-fsm
class InvalidConfig : public Error {
public:
    InvalidConfig(std::string field, const std::string& reason)
        : Error("invalid config field '" + field + "': " + reason), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class NonMonotonicInput : public Error {
public:
    NonMonotonicInput(long long last_ms, long long got_ms)
        : Error("input timestamp " + std::to_string(got_ms) + " precedes " + std::to_string(last_ms)) {}
};

// escalation
class Cancelled : public Error {
public:
    Cancelled() : Error("escalation run was cancelled") {}
};

class NoAttemptInFlight : public Error {
public:
    NoAttemptInFlight() : Error("no attempt in flight") {}
};

class UnknownContact : public Error {
public:
    explicit UnknownContact(const std::string& id) : Error("contact '" + id + "' is not the in-flight attempt") {}
};

// trace-io
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NonMonotonicTimestamps : public ParseError {
public:
    explicit NonMonotonicTimestamps(std::size_t line)
        : ParseError(line, "timestamp not strictly increasing") {}
};

class InvalidRecord : public Error {
public:
    explicit InvalidRecord(const std::string& reason) : Error("invalid record: " + reason) {}
};

class InvalidSpec : public Error {
public:
    explicit InvalidSpec(const std::string& reason) : Error("invalid scenario: " + reason) {}
};

// session-service
class UnknownSession : public Error {
public:
    explicit UnknownSession(const std::string& id) : Error("unknown session '" + id + "'") {}
};

}  // namespace comaguard
