// Copyright 2026 The Deconfound Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DECONFOUND_PARALLEL_HPP_
#define DECONFOUND_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace deconfound {

// Process-wide worker count. 0 means "all hardware threads".
void SetThreadCount(int n);
int ThreadCount();

// Runs body(i) for i in [0, n) across ThreadCount() workers. Each index is
// visited exactly once; callers write results into preallocated slots so the
// outcome never depends on scheduling. The first exception thrown by any
// body is rethrown on the calling thread after all workers join.
void ParallelFor(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace deconfound

#endif  // DECONFOUND_PARALLEL_HPP_
