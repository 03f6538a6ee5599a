// Copyright 2026 The priormix Authors. All Rights Reserved.
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

#ifndef PRIORMIX_CSV_HPP_
#define PRIORMIX_CSV_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace priormix::csv {

/// Shortest fixed-notation decimal that parses back to the same double.
std::string format_double(double value);

/// Parses a whole field as a double; returns false on trailing garbage.
bool parse_double(std::string_view field, double &out);

std::vector<std::string_view> split_fields(std::string_view line);

} // namespace priormix::csv

#endif // PRIORMIX_CSV_HPP_
