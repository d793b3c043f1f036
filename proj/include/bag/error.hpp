#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bag {

enum class errc {
  invalid_argument,
  unknown_function,
  unsupported_dim,
  domain_violation,
  empty_targets,
  empty_traces,
  runner_missing,
  spawn_failure,
  missing_parent,
  no_description,
  no_code_block,
  empty_code,
  auth_error,
  rate_limited,
  transport_error,
  provider_refusal,
  session_exhausted,
  digest_mismatch,
  all_zero_matrix,
  empty_component,
  empty_results,
  frontend_unavailable,
  io_error,
};

constexpr std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::unknown_function: return "UnknownFunction";
    case errc::unsupported_dim: return "UnsupportedDim";
    case errc::domain_violation: return "DomainViolation";
    case errc::empty_targets: return "EmptyTargets";
    case errc::empty_traces: return "EmptyTraces";
    case errc::runner_missing: return "RunnerMissing";
    case errc::spawn_failure: return "SpawnFailure";
    case errc::missing_parent: return "MissingParent";
    case errc::no_description: return "NoDescription";
    case errc::no_code_block: return "NoCodeBlock";
    case errc::empty_code: return "EmptyCode";
    case errc::auth_error: return "AuthError";
    case errc::rate_limited: return "RateLimited";
    case errc::transport_error: return "TransportError";
    case errc::provider_refusal: return "ProviderRefusal";
    case errc::session_exhausted: return "SessionExhausted";
    case errc::digest_mismatch: return "DigestMismatch";
    case errc::all_zero_matrix: return "AllZeroMatrix";
    case errc::empty_component: return "EmptyComponent";
    case errc::empty_results: return "EmptyResults";
    case errc::frontend_unavailable: return "FrontendUnavailable";
    case errc::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

}  // namespace bag
