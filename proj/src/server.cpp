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
#include "ampe/server.hpp"

#include "ampe/image_io.hpp"

#include <httplib.h>

#include <algorithm>
#include <iostream>

namespace fs = std::filesystem;

namespace ampe {
namespace {

constexpr const char* kResultNames[] = {"input", "bm", "refined"};

bool valid_run_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

// Fallback viewer: upload, α slider, client-side blend.
constexpr const char* kBuiltinPage = R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>ampe</title>
<style>body{font-family:sans-serif;margin:2em}canvas{border:1px solid #ccc;max-width:100%}#err{color:#b00}</style>
</head><body>
<input type="file" id="file" accept="image/png">
<label>&alpha; <input type="range" id="alpha" min="0" max="1" step="0.01" value="0.9"> <span id="val">0.90</span></label>
<span id="presets"></span>
<div id="err"></div>
<canvas id="out"></canvas>
<script>
const $ = id => document.getElementById(id);
let bm = null, refined = null;
async function pixels(url) {
  const img = new Image();
  img.src = url;
  await img.decode();
  const c = document.createElement('canvas');
  c.width = img.width; c.height = img.height;
  const g = c.getContext('2d');
  g.drawImage(img, 0, 0);
  return g.getImageData(0, 0, img.width, img.height);
}
function render() {
  const a = parseFloat($('alpha').value);
  $('val').textContent = a.toFixed(2);
  if (!bm) return;
  const out = new ImageData(bm.width, bm.height);
  for (let i = 0; i < out.data.length; i++)
    out.data[i] = (i % 4 === 3) ? 255 : Math.floor(a * bm.data[i] + (1 - a) * refined.data[i] + 0.5);
  const c = $('out');
  c.width = bm.width; c.height = bm.height;
  c.getContext('2d').putImageData(out, 0, 0);
}
$('file').onchange = async e => {
  $('err').textContent = '';
  const r = await fetch('derain', {method: 'POST', body: e.target.files[0]});
  if (!r.ok) { $('err').textContent = await r.text(); return; }
  const id = (await r.json()).run_id;
  [bm, refined] = await Promise.all([pixels(`result/${id}/bm.png`), pixels(`result/${id}/refined.png`)]);
  render();
};
$('alpha').oninput = render;
for (const a of [1.0, 0.6, 0.3, 0.0]) {
  const b = document.createElement('button');
  b.textContent = a.toFixed(1);
  b.onclick = () => { $('alpha').value = a; render(); };
  $('presets').appendChild(b);
}
</script></body></html>
)html";

}  // namespace

DerainService::DerainService(Model<float> model, fs::path root, std::string checkpoint_name)
    : model_(std::move(model)), root_(std::move(root)), checkpoint_name_(std::move(checkpoint_name)) {
  if (!model_.complete()) throw ConfigError("server: checkpoint is incomplete; run phase 'main' first");
  fs::create_directories(root_ / "runs");
  fs::create_directories(root_ / "staging");
}

std::string DerainService::submit(std::span<const std::uint8_t> png) {
  if (!looks_like_png(png)) throw BadRequest("request body is not a PNG image");
  Tensor<double> image;
  try {
    image = decode_png(png);
  } catch (const std::exception& e) {
    throw BadRequest(std::string("cannot decode PNG: ") + e.what());
  }
  const std::string id = create_run_dir(root_ / "staging");
  const fs::path staging = root_ / "staging" / id;
  try {
    derain_to_dir(model_, image, {}, staging, "upload", checkpoint_name_);
    fs::rename(staging, root_ / "runs" / id);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return id;
}

std::optional<fs::path> DerainService::result_file(const std::string& run_id, const std::string& name) const {
  if (!valid_run_id(run_id)) return std::nullopt;
  if (std::find(std::begin(kResultNames), std::end(kResultNames), name) == std::end(kResultNames)) return std::nullopt;
  const fs::path p = root_ / "runs" / run_id / (name + ".png");
  if (!fs::is_regular_file(p)) return std::nullopt;
  return p;
}

std::vector<std::string> DerainService::runs() const {
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root_ / "runs"))
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct Server::Impl {
  ServerOptions options;
  DerainService service;
  httplib::Server http;

  explicit Impl(ServerOptions o)
      : options(std::move(o)),
        service(load_checkpoint(options.checkpoint).model, options.root, options.checkpoint.string()) {}
};

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto& http = impl_->http;
  DerainService& svc = impl_->service;
  http.set_payload_max_length(64u << 20);
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  http.Post("/derain", [&svc](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
      const std::string id = svc.submit({bytes, req.body.size()});
      res.set_content(nlohmann::json{{"run_id", id}}.dump(), "application/json");
    } catch (const BadRequest& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(e.what(), "text/plain");
    }
  });

  http.Get(R"(/result/([^/]+)/([a-z]+)\.png)", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto path = svc.result_file(req.matches[1], req.matches[2]);
    if (!path) {
      res.status = 404;
      res.set_content("unknown run or image", "text/plain");
      return;
    }
    const auto bytes = read_file_bytes(*path);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  });

  http.Get("/runs", [&svc](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json(svc.runs()).dump(), "application/json");
  });

  if (impl_->options.static_dir) {
    if (!http.set_mount_point("/", impl_->options.static_dir->string()))
      throw IoError("static directory " + impl_->options.static_dir->string() + " does not exist");
  } else {
    http.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_content(kBuiltinPage, "text/html"); });
  }
}

Server::~Server() { stop(); }

int Server::bind(int port) {
  auto& http = impl_->http;
  if (port == 0) {
    const int bound = http.bind_to_any_port(impl_->options.host);
    if (bound < 0) throw IoError("cannot bind " + impl_->options.host);
    return bound;
  }
  if (!http.bind_to_port(impl_->options.host, port))
    throw IoError("cannot bind " + impl_->options.host + ":" + std::to_string(port));
  return port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

DerainService& Server::service() { return impl_->service; }

}  // namespace ampe
