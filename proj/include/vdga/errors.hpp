#pragma once

#include <stdexcept>
#include <string>

namespace vdga {

// Base of every error raised by the library. Each concrete condition gets its
// own type so callers (and tests) can catch precisely what they expect.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define VDGA_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                 \
  public:                                                                     \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {}      \
  }

// geometry
VDGA_DEFINE_ERROR(InvalidRegion);
VDGA_DEFINE_ERROR(DuplicateSeeds);
VDGA_DEFINE_ERROR(SeedOutOfBounds);
VDGA_DEFINE_ERROR(DegeneratePolygon);
VDGA_DEFINE_ERROR(MixedRadii);

// optimizer
VDGA_DEFINE_ERROR(InvalidConfig);
VDGA_DEFINE_ERROR(PopulationTooSmall);
VDGA_DEFINE_ERROR(LengthMismatch);

// protocol
VDGA_DEFINE_ERROR(PayloadTooLarge);
VDGA_DEFINE_ERROR(TruncatedFrame);
VDGA_DEFINE_ERROR(UnknownKind);
VDGA_DEFINE_ERROR(ChromosomeTooLarge);
VDGA_DEFINE_ERROR(CoordinateOutOfRange);
VDGA_DEFINE_ERROR(ProtocolViolation);

// simnet
VDGA_DEFINE_ERROR(SessionTimeout);
VDGA_DEFINE_ERROR(EventInPast);

// harness / cli
VDGA_DEFINE_ERROR(CoincidentNodes);
VDGA_DEFINE_ERROR(ConfigParse);
VDGA_DEFINE_ERROR(IoFailure);
VDGA_DEFINE_ERROR(UnknownSubcommand);

#undef VDGA_DEFINE_ERROR

}  // namespace vdga
