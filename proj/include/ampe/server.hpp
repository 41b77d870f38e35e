/*
 * Copyright (c) The ampe authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Local result server for the α viewer.
//
//   POST /derain                          PNG body -> {"run_id": "..."}
//   GET  /result/<id>/input.png|bm.png|refined.png
//   GET  /runs                            JSON array of run ids
//   GET  /                                viewer (static dir or built-in page)
//
// Each upload is processed once; blending by α happens in the client.
// Runs are written under <root>/staging/<id> and renamed into
// <root>/runs/<id> when complete, so a listed run is always whole.

#include "ampe/commands.hpp"

#include <memory>

namespace ampe {

class BadRequest : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The HTTP-independent part: one shared read-only model, a run directory.
class DerainService {
 public:
  DerainService(Model<float> model, std::filesystem::path root, std::string checkpoint_name = "");

  /// Processes a PNG upload and returns its run id. Non-PNG or undecodable
  /// bodies raise BadRequest.
  std::string submit(std::span<const std::uint8_t> png);

  /// Path of input/bm/refined for a finished run; empty for unknown ids or names.
  std::optional<std::filesystem::path> result_file(const std::string& run_id, const std::string& name) const;

  /// Finished run ids, sorted.
  std::vector<std::string> runs() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  Model<float> model_;
  std::filesystem::path root_;
  std::string checkpoint_name_;
};

struct ServerOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path root = artifact_root();
  std::optional<std::filesystem::path> static_dir;
  std::string host = "127.0.0.1";
};

class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds `port` (0 picks a free one) and returns the bound port.
  int bind(int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

  DerainService& service();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ampe
