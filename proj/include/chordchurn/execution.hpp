#pragma once

namespace chordchurn {

// Serial runs are the reference; parallel runs must reproduce them exactly.
enum class Exec { Serial, Parallel };

// Caps OpenMP threads; 0 leaves the runtime default. No-op without OpenMP.
void set_parallelism(int jobs);
int parallelism();

} // namespace chordchurn
