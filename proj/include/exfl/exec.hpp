#pragma once

namespace exfl {

/// Scheduling policy for independent work items (scenarios, sweep cells).
/// Both policies produce identical results; Parallel uses OpenMP when built
/// with it and silently falls back to Serial otherwise.
enum class Execution { Serial, Parallel };

}  // namespace exfl
