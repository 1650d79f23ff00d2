// Copyright 2026 The redest Authors
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

#include "redest/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "redest/error.h"

namespace redest {
namespace {

std::string Csv(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s.empty() ? "-" : s;
}

std::vector<int> ParseCsv(const std::string& s) {
  std::vector<int> out;
  if (s == "-") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

void WriteReals(std::ostream& os, const Vec& values) {
  std::string buf(values.size() * 8, '\0');
  for (size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      buf[i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void ReadReals(std::istream& is, Vec& values) {
  std::string buf(values.size() * 8, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!is) throw ContractError("checkpoint payload truncated");
  for (size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(buf[i * 8 + b]))
              << (8 * b);
    }
    values[i] = std::bit_cast<Real>(bits);
  }
}

}  // namespace

void Checkpoint::SetMeta(const std::string& key, const std::string& value) {
  Require(!key.empty() && key.find_first_of(" \n") == std::string::npos,
          "checkpoint meta keys must be single tokens");
  Require(value.find('\n') == std::string::npos,
          "checkpoint meta values must be single-line");
  meta_[key] = value;
}

std::optional<std::string> Checkpoint::Meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) return std::nullopt;
  return it->second;
}

void Checkpoint::AddStack(const std::string& name, const LayerStack& stack) {
  Require(!HasStack(name), "duplicate stack '" + name + "'");
  stacks_.emplace_back(name, stack);
}

void Checkpoint::AddTensor(const std::string& name, const TensorParam& t) {
  for (const auto& [n, _] : tensors_) {
    Require(n != name, "duplicate tensor '" + name + "'");
  }
  tensors_.emplace_back(name, t);
}

bool Checkpoint::HasStack(const std::string& name) const {
  for (const auto& [n, _] : stacks_) {
    if (n == name) return true;
  }
  return false;
}

const LayerStack& Checkpoint::Stack(const std::string& name) const {
  for (const auto& [n, s] : stacks_) {
    if (n == name) return s;
  }
  throw ContractError("checkpoint has no stack '" + name + "'");
}

const TensorParam& Checkpoint::Tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors_) {
    if (n == name) return t;
  }
  throw ContractError("checkpoint has no tensor '" + name + "'");
}

void Checkpoint::RestoreInto(const std::string& name, LayerStack& dst) const {
  const LayerStack& src = Stack(name);
  Require(src.input_shape() == dst.input_shape() &&
              src.layers().size() == dst.layers().size(),
          "checkpoint stack '" + name + "' does not match target layout");
  for (size_t i = 0; i < src.layers().size(); ++i) {
    const Layer& a = src.layers()[i];
    Layer& b = dst.layers()[i];
    Require(a.desc.kind == b.desc.kind && a.desc.attrs == b.desc.attrs,
            "checkpoint stack '" + name + "' layer " + std::to_string(i) +
                " does not match target layout");
    for (size_t p = 0; p < a.params.size(); ++p) {
      b.params[p].values = a.params[p].values;
      b.params[p].ZeroGrad();
    }
  }
}

void Checkpoint::RestoreInto(const std::string& name, TensorParam& dst) const {
  const TensorParam& src = Tensor(name);
  Require(src.shape == dst.shape,
          "checkpoint tensor '" + name + "' shape mismatch");
  dst.values = src.values;
  dst.ZeroGrad();
}

void Checkpoint::Write(std::ostream& os) const {
  os << "redest-checkpoint\n";
  os << "format_version " << kCheckpointFormatVersion << "\n";
  os << "dtype f64\n";
  for (const auto& [k, v] : meta_) os << "meta " << k << " " << v << "\n";
  for (const auto& [name, s] : stacks_) {
    os << "stack " << name << " " << Csv(s.input_shape()) << " "
       << s.layers().size() << "\n";
    for (const Layer& l : s.layers()) {
      os << "layer " << LayerKindName(l.desc.kind) << " " << Csv(l.desc.attrs)
         << "\n";
    }
  }
  for (const auto& [name, t] : tensors_) {
    os << "tensor " << name << " " << Csv(t.shape) << "\n";
  }
  os << "end\n";
  for (const auto& [_, s] : stacks_) {
    for (const TensorParam* p : s.Params()) WriteReals(os, p->values);
  }
  for (const auto& [_, t] : tensors_) WriteReals(os, t.values);
}

Checkpoint Checkpoint::Read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "redest-checkpoint") {
    throw ContractError("not a redest checkpoint");
  }
  Checkpoint ck;
  bool saw_version = false;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format_version") {
      int v = 0;
      ls >> v;
      if (v != kCheckpointFormatVersion) {
        throw ContractError("unsupported checkpoint format_version " +
                            std::to_string(v));
      }
      saw_version = true;
    } else if (tag == "dtype") {
      std::string d;
      ls >> d;
      Require(d == "f64", "unsupported checkpoint dtype " + d);
    } else if (tag == "meta") {
      std::string key, value;
      ls >> key;
      std::getline(ls >> std::ws, value);
      ck.meta_[key] = value;
    } else if (tag == "stack") {
      std::string name, shape;
      size_t n = 0;
      ls >> name >> shape >> n;
      LayerStack s(ParseCsv(shape));
      for (size_t i = 0; i < n; ++i) {
        Require(static_cast<bool>(std::getline(is, line)),
                "checkpoint manifest truncated");
        std::istringstream ll(line);
        std::string ltag, kind, attrs;
        ll >> ltag >> kind >> attrs;
        Require(ltag == "layer", "expected layer line, got '" + line + "'");
        s.Append({LayerKindFromName(kind), ParseCsv(attrs)});
      }
      ck.stacks_.emplace_back(name, std::move(s));
    } else if (tag == "tensor") {
      std::string name, shape;
      ls >> name >> shape;
      ck.tensors_.emplace_back(name, TensorParam(ParseCsv(shape)));
    } else {
      throw ContractError("unknown checkpoint manifest line '" + line + "'");
    }
  }
  Require(line == "end", "checkpoint manifest missing 'end'");
  Require(saw_version, "checkpoint manifest missing format_version");
  for (auto& [_, s] : ck.stacks_) {
    for (TensorParam* p : s.Params()) ReadReals(is, p->values);
  }
  for (auto& [_, t] : ck.tensors_) ReadReals(is, t.values);
  return ck;
}

void Checkpoint::Save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  Require(static_cast<bool>(os), "cannot open '" + path + "' for writing");
  Write(os);
  Require(static_cast<bool>(os), "failed writing '" + path + "'");
}

Checkpoint Checkpoint::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  Require(static_cast<bool>(is), "cannot open checkpoint '" + path + "'");
  return Read(is);
}

bool SameParameters(const LayerStack& a, const LayerStack& b) {
  if (a.input_shape() != b.input_shape()) return false;
  if (a.layers().size() != b.layers().size()) return false;
  for (size_t i = 0; i < a.layers().size(); ++i) {
    const Layer& la = a.layers()[i];
    const Layer& lb = b.layers()[i];
    if (la.desc.kind != lb.desc.kind || la.desc.attrs != lb.desc.attrs) {
      return false;
    }
    for (size_t p = 0; p < la.params.size(); ++p) {
      const Vec& va = la.params[p].values;
      const Vec& vb = lb.params[p].values;
      if (va.size() != vb.size()) return false;
      if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(Real)) != 0) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace redest
