#pragma once

#include <functional>
#include <string_view>

namespace ccast {

/// Execution mode for data-parallel kernels. The serial path is the
/// reference implementation; kernels must produce bit-identical output in
/// both modes, which they get by deriving independent random substreams per
/// work item and writing only to index-addressed slots.
enum class ParallelMode { serial, openmp };
ParallelMode parallel_mode_from_string(std::string_view s);

/// Runs body(i) for i in [0, n). workers = 0 uses the runtime default.
void parallel_for(int n, ParallelMode mode, int workers, const std::function<void(int)>& body);

}  // namespace ccast
