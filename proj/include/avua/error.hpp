#pragma once

#include <stdexcept>
#include <string>

namespace avua {

// Base of every error the library throws. Each subclass names one failure
// mode from the module contracts so callers can catch precisely.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define AVUA_DEFINE_ERROR(Name) \
    class Name : public Error {  \
    public:                      \
        using Error::Error;      \
    }

// llm gateway
AVUA_DEFINE_ERROR(NoScriptMatch);
AVUA_DEFINE_ERROR(TransportError);
AVUA_DEFINE_ERROR(EmptyText);
AVUA_DEFINE_ERROR(DigestMiss);
AVUA_DEFINE_ERROR(IoFailure);

// policy / planner / reflection
AVUA_DEFINE_ERROR(PolicyParseFailure);
AVUA_DEFINE_ERROR(StepParseFailure);
AVUA_DEFINE_ERROR(EpisodeAbort);

// sampler / toolbox
AVUA_DEFINE_ERROR(InvalidRange);
AVUA_DEFINE_ERROR(DuplicateTool);
AVUA_DEFINE_ERROR(UnknownTool);
AVUA_DEFINE_ERROR(AdapterFailure);

// memory
AVUA_DEFINE_ERROR(DimensionMismatch);

// harness / cli
AVUA_DEFINE_ERROR(TraceCorrupt);
AVUA_DEFINE_ERROR(ConfigError);

#undef AVUA_DEFINE_ERROR

}  // namespace avua
