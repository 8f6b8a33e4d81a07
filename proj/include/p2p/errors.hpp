#ifndef P2P_ERRORS_HPP
#define P2P_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace p2p {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Scenario / configuration errors (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};
class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};
class UnknownKey : public ConfigError {
public:
    using ConfigError::ConfigError;
};
class InvalidValue : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Runtime invariant violations (CLI exit code 3).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

class SchedulingInPast : public Error {
public:
    using Error::Error;
};
class InvalidParams : public Error {
public:
    using Error::Error;
};
class DomainError : public Error {
public:
    using Error::Error;
};
class EmptyGraph : public Error {
public:
    using Error::Error;
};
class DegenerateFit : public Error {
public:
    using Error::Error;
};
class EmptyRing : public Error {
public:
    using Error::Error;
};
class JoinFailed : public Error {
public:
    using Error::Error;
};
class LookupTimeout : public Error {
public:
    using Error::Error;
};
class BootstrapFailed : public Error {
public:
    using Error::Error;
};
class MediatorUnavailable : public Error {
public:
    using Error::Error;
};
class AlreadyMember : public Error {
public:
    using Error::Error;
};
class NotRegistered : public Error {
public:
    using Error::Error;
};
class UnknownTorrent : public Error {
public:
    using Error::Error;
};
class NothingWanted : public Error {
public:
    using Error::Error;
};
class AmbiguousVersion : public Error {
public:
    using Error::Error;
};
class InsufficientPeers : public Error {
public:
    using Error::Error;
};
class NegativeInput : public Error {
public:
    using Error::Error;
};
class NoSnapshot : public Error {
public:
    using Error::Error;
};
class DuplicateNodeId : public Error {
public:
    using Error::Error;
};

} // namespace p2p

#endif
