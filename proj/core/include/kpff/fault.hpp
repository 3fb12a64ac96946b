#pragma once

#include <optional>
#include <string_view>

// Mutation hooks used to prove the verification suites can detect broken
// gradients or optimizer math. Only compiled in when KPFF_TEST_HOOKS is set;
// otherwise `fault_active` is a constant false and `set_fault` refuses.

namespace kpff {

enum class Fault {
  none,
  kpff_w_block_offset,     // off-by-one block index in the weight gradient
  kpff_x_transposed,       // w_{k,j} instead of w_{j,k} in the input gradient
  adam_no_bias_correction,
};

constexpr bool kTestHooksCompiled =
#ifdef KPFF_TEST_HOOKS
    true;
#else
    false;
#endif

std::optional<Fault> parse_fault(std::string_view name);
std::string_view fault_name(Fault f);

/// Throws std::logic_error when hooks are not compiled in.
void set_fault(Fault f);
Fault current_fault() noexcept;

inline bool fault_active(Fault f) noexcept {
  if constexpr (kTestHooksCompiled) {
    return current_fault() == f;
  } else {
    (void)f;
    return false;
  }
}

/// Installs a fault for the lifetime of the guard.
class ScopedFault {
 public:
  explicit ScopedFault(Fault f) : previous_(current_fault()) { set_fault(f); }
  ~ScopedFault() { set_fault(previous_); }
  ScopedFault(const ScopedFault&) = delete;
  ScopedFault& operator=(const ScopedFault&) = delete;

 private:
  Fault previous_;
};

}  // namespace kpff
