#pragma once

namespace rankgauntlet {

// Sinkhorn traces allocate many large matrices of one size per call. On
// glibc, raises the mmap threshold so those come from the heap instead of a
// fresh mapping each time. A no-op elsewhere.
void tune_allocator();

}  // namespace rankgauntlet
