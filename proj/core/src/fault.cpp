#include "kpff/fault.hpp"

#include <atomic>
#include <stdexcept>

namespace kpff {

namespace {
std::atomic<Fault> g_fault{Fault::none};
}

std::optional<Fault> parse_fault(std::string_view name) {
  if (name == "none") return Fault::none;
  if (name == "kpff-w") return Fault::kpff_w_block_offset;
  if (name == "kpff-x") return Fault::kpff_x_transposed;
  if (name == "adam-bias") return Fault::adam_no_bias_correction;
  return std::nullopt;
}

std::string_view fault_name(Fault f) {
  switch (f) {
    case Fault::none: return "none";
    case Fault::kpff_w_block_offset: return "kpff-w";
    case Fault::kpff_x_transposed: return "kpff-x";
    case Fault::adam_no_bias_correction: return "adam-bias";
  }
  return "unknown";
}

void set_fault(Fault f) {
  if (!kTestHooksCompiled && f != Fault::none) {
    throw std::logic_error("fault injection is not compiled into this build");
  }
  g_fault.store(f, std::memory_order_relaxed);
}

Fault current_fault() noexcept { return g_fault.load(std::memory_order_relaxed); }

}  // namespace kpff
