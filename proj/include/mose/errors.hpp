#pragma once

#include <stdexcept>
#include <string>

namespace mose {

// Precondition violations use std::invalid_argument / std::domain_error.
// The types below name the failure modes callers are expected to branch on.

class UnderDeterminedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IncompleteMetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingFlowError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mose
