// Copyright 2026 The irweak Authors.
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

#pragma once

#include <atomic>
#include <cstdint>

namespace irweak {

/// Process-wide call counters for the training-only components, so tests can
/// assert that inference never reaches them.
struct CallCounters {
  std::atomic<std::uint64_t> segmenter{0};
  std::atomic<std::uint64_t> activation_generator{0};
  std::atomic<std::uint64_t> mil_classifier{0};

  void reset() {
    segmenter = 0;
    activation_generator = 0;
    mil_classifier = 0;
  }
};

CallCounters& call_counters();

}  // namespace irweak
