#pragma once

#include <stdexcept>
#include <string>

namespace safepatch {

// Every failure carries a stable machine-parsable class token; the CLI prints
// them on stderr as "error[<token>]: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string token, const std::string& msg)
        : std::runtime_error(msg), token_(std::move(token)) {}
    const std::string& class_token() const noexcept { return token_; }

private:
    std::string token_;
};

#define SAFEPATCH_DEFINE_ERROR(Name, token)                     \
    class Name : public Error {                                 \
    public:                                                     \
        explicit Name(const std::string& msg)                   \
            : Error(token, msg) {}                              \
    }

SAFEPATCH_DEFINE_ERROR(InvalidShapeError, "invalid-shape");
SAFEPATCH_DEFINE_ERROR(InvalidConfigError, "invalid-config");
SAFEPATCH_DEFINE_ERROR(InvalidTokenError, "invalid-token");
SAFEPATCH_DEFINE_ERROR(InvalidImageError, "invalid-image");
SAFEPATCH_DEFINE_ERROR(InvalidStepError, "invalid-step");
SAFEPATCH_DEFINE_ERROR(InvalidInjectionError, "invalid-injection");
SAFEPATCH_DEFINE_ERROR(InvalidPromptError, "invalid-prompt");
SAFEPATCH_DEFINE_ERROR(NoSafeCandidateError, "no-safe-candidate");
SAFEPATCH_DEFINE_ERROR(IncompatiblePatchError, "incompatible-patch");
SAFEPATCH_DEFINE_ERROR(CorruptFileError, "corrupt-file");
SAFEPATCH_DEFINE_ERROR(WrongKindError, "wrong-kind");
SAFEPATCH_DEFINE_ERROR(UndefinedRatioError, "undefined-ratio");
SAFEPATCH_DEFINE_ERROR(NonFiniteError, "non-finite");
SAFEPATCH_DEFINE_ERROR(ContractError, "contract");
SAFEPATCH_DEFINE_ERROR(IoError, "io");

#undef SAFEPATCH_DEFINE_ERROR

} // namespace safepatch
