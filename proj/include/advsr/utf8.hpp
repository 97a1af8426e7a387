// Copyright 2026 The advsr-lab Authors.
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

#include <string>
#include <string_view>
#include <vector>

namespace advsr::utf8 {

// Byte length of the UTF-8 sequence starting with `lead`. Invalid lead bytes
// count as single-byte characters so arbitrary input never stalls.
int sequence_length(unsigned char lead);

// Splits text into its characters, each a view into `text`.
std::vector<std::string_view> split_chars(std::string_view text);

std::size_t char_count(std::string_view text);

// Whitespace-separated tokens (ASCII whitespace), empty tokens dropped.
std::vector<std::string_view> split_words(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace advsr::utf8
