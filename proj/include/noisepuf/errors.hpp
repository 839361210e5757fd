#pragma once

#include <stdexcept>

namespace noisepuf {

/// A peer sent something the protocol does not allow.
class ProtocolError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A persisted record failed its integrity check.
class IntegrityError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace noisepuf
