/*
 * Copyright 2026 The benchrel Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "benchrel/error.hpp"
#include "benchrel/resampling.hpp"
#include "benchrel/table.hpp"

namespace benchrel {

// Reports are JSON with insertion-ordered keys and plot data is the shared
// delimited dialect, so reruns with the same configuration are diffable
// byte for byte.
using json = nlohmann::ordered_json;

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::InvalidArgument, "cannot write '" + path.string() + "'");
  out << content;
}

inline std::filesystem::path write_report(const std::filesystem::path& outdir,
                                          const std::string& command,
                                          const json& body) {
  std::filesystem::create_directories(outdir);
  const auto path = outdir / (command + "_report.json");
  write_text_file(path, body.dump(2) + "\n");
  return path;
}

inline std::filesystem::path write_plot(const std::filesystem::path& outdir,
                                        const std::string& name,
                                        const Table& table) {
  std::filesystem::create_directories(outdir);
  const auto path = outdir / (name + ".csv");
  std::ostringstream body;
  write_table(body, table);
  write_text_file(path, body.str());
  return path;
}

/// The examples-axis size sentinel renders as "original" everywhere.
inline std::string size_label(std::int64_t size) {
  return size == kOriginalSize ? "original" : std::to_string(size);
}

inline json size_json(std::int64_t size) {
  if (size == kOriginalSize) return json("original");
  return json(size);
}

inline std::int64_t size_from_json(const json& value) {
  if (value.is_string()) {
    if (value.get<std::string>() == "original") return kOriginalSize;
    fail(Errc::InvalidArgument, "bad size value in report");
  }
  return value.get<std::int64_t>();
}

}  // namespace benchrel
