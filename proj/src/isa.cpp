/*
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
#include "xgc/isa.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace xgc {

const char* space_name(Space s) {
  switch (s) {
    case Space::Ddr: return "ddr";
    case Space::BufIn: return "in";
    case Space::BufWt: return "wt";
    case Space::BufOut: return "out";
  }
  return "?";
}

namespace {

std::optional<Space> space_from_name(const std::string& n) {
  if (n == "ddr") return Space::Ddr;
  if (n == "in") return Space::BufIn;
  if (n == "wt") return Space::BufWt;
  if (n == "out") return Space::BufOut;
  return std::nullopt;
}

const char* misc_name(MiscOp op) {
  switch (op) {
    case MiscOp::Start: return "start";
    case MiscOp::End: return "end";
    case MiscOp::Eltwise: return "eltwise";
    case MiscOp::Reorg: return "reorg";
  }
  return "?";
}

std::optional<MiscOp> misc_from_name(const std::string& n) {
  if (n == "start") return MiscOp::Start;
  if (n == "end") return MiscOp::End;
  if (n == "eltwise") return MiscOp::Eltwise;
  if (n == "reorg") return MiscOp::Reorg;
  return std::nullopt;
}

}  // namespace

Stream finalize_stream(Stream body) {
  for (size_t i = 0; i < body.size(); ++i)
    require(body[i].seq == i, ErrCode::Invalid, "body stream must be densely numbered");

  Stream out;
  out.reserve(body.size() + 2);
  Instruction start;
  start.kind = InstrKind::Misc;
  start.misc = MiscOp::Start;
  start.seq = 0;
  out.push_back(start);
  for (Instruction& ins : body) {
    ins.seq += 1;
    for (uint32_t& d : ins.deps) d += 1;
    out.push_back(std::move(ins));
  }
  Instruction end;
  end.kind = InstrKind::Misc;
  end.misc = MiscOp::End;
  end.seq = static_cast<uint32_t>(out.size());
  std::map<InstrKind, uint32_t> last;
  for (size_t i = 1; i < out.size(); ++i) last[out[i].kind] = out[i].seq;
  for (const auto& [kind, seq] : last) end.deps.push_back(seq);
  std::sort(end.deps.begin(), end.deps.end());
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Text form.

namespace {

std::string region_str(const Region& r) {
  std::ostringstream os;
  os << space_name(r.space) << "@" << r.pat.base << "[" << r.pat.n0 << "," << r.pat.s0
     << ";" << r.pat.n1 << "," << r.pat.s1 << ";" << r.pat.run << "]";
  return os.str();
}

Region parse_region(const std::string& s) {
  auto at = s.find('@');
  auto lb = s.find('[');
  require(at != std::string::npos && lb != std::string::npos && s.back() == ']',
          ErrCode::Encoding, "bad region '" + s + "'");
  auto space = space_from_name(s.substr(0, at));
  require(space.has_value(), ErrCode::Encoding, "bad region space in '" + s + "'");
  Region r;
  r.space = *space;
  r.pat.base = static_cast<uint32_t>(std::stoul(s.substr(at + 1, lb - at - 1)));
  std::string body = s.substr(lb + 1, s.size() - lb - 2);
  unsigned long long v[5] = {0, 0, 0, 0, 0};
  if (std::sscanf(body.c_str(), "%llu,%llu;%llu,%llu;%llu", &v[0], &v[1], &v[2], &v[3],
                  &v[4]) != 5)
    fail(ErrCode::Encoding, "bad region pattern '" + s + "'");
  r.pat.n0 = static_cast<uint32_t>(v[0]);
  r.pat.s0 = static_cast<uint32_t>(v[1]);
  r.pat.n1 = static_cast<uint32_t>(v[2]);
  r.pat.s1 = static_cast<uint32_t>(v[3]);
  r.pat.run = static_cast<uint32_t>(v[4]);
  return r;
}

std::string deps_str(const std::vector<uint32_t>& deps) {
  std::string s = "deps=";
  for (size_t i = 0; i < deps.size(); ++i) s += (i ? "," : "") + std::to_string(deps[i]);
  return s;
}

}  // namespace

std::string emit_text(const Stream& s) {
  std::ostringstream os;
  for (const Instruction& ins : s) {
    os << ins.seq << " ";
    switch (ins.kind) {
      case InstrKind::Load:
      case InstrKind::Save: {
        os << (ins.kind == InstrKind::Load ? "LOAD" : "SAVE");
        os << " dst=" << region_str(*ins.write);
        os << " src=" << region_str(ins.reads.at(0));
        break;
      }
      case InstrKind::Conv: {
        const auto& a = std::get<ConvArgs>(ins.args);
        os << "CONV in=" << region_str(ins.reads.at(0))
           << " wt=" << region_str(ins.reads.at(1));
        if (a.has_bias) os << " bias=" << region_str(ins.reads.at(2));
        os << " out=" << region_str(*ins.write);
        os << " io=" << a.in_w << "x" << a.in_h << "x" << a.in_c << ":" << a.out_w << "x"
           << a.out_h << "x" << a.out_c;
        os << " k=" << int(a.k_w) << "x" << int(a.k_h);
        os << " s=" << int(a.s_w) << "x" << int(a.s_h);
        os << " d=" << int(a.dilation);
        os << " pad=" << a.pad_top << "," << a.pad_left << "," << a.pad_bottom << ","
           << a.pad_right;
        os << " mode=" << (a.mode == 0 ? "conv" : a.mode == 1 ? "dw" : "deconv");
        os << " acc=" << int(a.accumulate) << " rq=" << int(a.requant)
           << " relu=" << int(a.relu) << " bsh=" << int(a.bias_shift)
           << " osh=" << int(a.out_shift);
        break;
      }
      case InstrKind::Pool: {
        const auto& a = std::get<PoolArgs>(ins.args);
        os << "POOL in=" << region_str(ins.reads.at(0))
           << " out=" << region_str(*ins.write);
        os << " io=" << a.in_w << "x" << a.in_h << ":" << a.out_w << "x" << a.out_h << "x"
           << a.channels;
        os << " k=" << int(a.k_w) << "x" << int(a.k_h);
        os << " s=" << int(a.s_w) << "x" << int(a.s_h);
        os << " pad=" << a.pad_top << "," << a.pad_left << "," << a.pad_bottom << ","
           << a.pad_right;
        os << " type=" << (a.avg ? "avg" : "max");
        os << " osh=" << int(a.out_shift);
        break;
      }
      case InstrKind::Misc: {
        os << "MISC op=" << misc_name(ins.misc);
        if (ins.misc == MiscOp::Eltwise) {
          const auto& a = std::get<EltwiseArgs>(ins.args);
          for (size_t i = 0; i < ins.reads.size(); ++i)
            os << " in" << i << "=" << region_str(ins.reads[i]);
          os << " out=" << region_str(*ins.write);
          os << " elems=" << a.elems << " arity=" << int(a.arity)
             << " relu=" << int(a.relu);
          os << " ish=";
          for (int i = 0; i < a.arity; ++i) os << (i ? "," : "") << int(a.in_shift[i]);
          os << " osh=" << int(a.out_shift);
        } else if (ins.misc == MiscOp::Reorg) {
          const auto& a = std::get<ReorgArgs>(ins.args);
          os << " in=" << region_str(ins.reads.at(0)) << " out=" << region_str(*ins.write);
          os << " io=" << a.in_w << "x" << a.in_h << "x" << a.in_c;
          os << " stride=" << int(a.stride);
        }
        break;
      }
    }
    os << " " << deps_str(ins.deps) << "\n";
  }
  return os.str();
}

namespace {

std::map<std::string, std::string> kv_fields(const std::vector<std::string>& tokens,
                                             size_t from) {
  std::map<std::string, std::string> kv;
  for (size_t i = from; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    require(eq != std::string::npos, ErrCode::Encoding, "bad field '" + tokens[i] + "'");
    kv[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return kv;
}

std::vector<int64_t> split_ints(const std::string& s, char sep) {
  std::vector<int64_t> out;
  if (s.empty()) return out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(std::stoll(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::stoll(cur));
  return out;
}

}  // namespace

Stream parse_text(const std::string& text) {
  Stream out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty()) continue;
    require(tok.size() >= 2, ErrCode::Encoding, "bad instruction line: " + line);

    Instruction ins;
    ins.seq = static_cast<uint32_t>(std::stoul(tok[0]));
    auto kv = kv_fields(tok, 2);
    auto need = [&](const char* key) -> const std::string& {
      auto it = kv.find(key);
      require(it != kv.end(), ErrCode::Encoding,
              std::string("missing field ") + key + " in: " + line);
      return it->second;
    };
    if (auto it = kv.find("deps"); it != kv.end() && !it->second.empty())
      for (int64_t d : split_ints(it->second, ','))
        ins.deps.push_back(static_cast<uint32_t>(d));

    const std::string& op = tok[1];
    if (op == "LOAD" || op == "SAVE") {
      ins.kind = op == "LOAD" ? InstrKind::Load : InstrKind::Save;
      ins.write = parse_region(need("dst"));
      ins.reads = {parse_region(need("src"))};
    } else if (op == "CONV") {
      ins.kind = InstrKind::Conv;
      ConvArgs a;
      ins.reads = {parse_region(need("in")), parse_region(need("wt"))};
      if (kv.count("bias")) {
        ins.reads.push_back(parse_region(need("bias")));
        a.has_bias = 1;
      }
      ins.write = parse_region(need("out"));
      unsigned iw, ih, ic, ow, oh, oc;
      require(std::sscanf(need("io").c_str(), "%ux%ux%u:%ux%ux%u", &iw, &ih, &ic, &ow,
                          &oh, &oc) == 6,
              ErrCode::Encoding, "bad io field");
      a.in_w = iw; a.in_h = ih; a.in_c = ic;
      a.out_w = ow; a.out_h = oh; a.out_c = oc;
      unsigned x, y;
      require(std::sscanf(need("k").c_str(), "%ux%u", &x, &y) == 2, ErrCode::Encoding,
              "bad k field");
      a.k_w = static_cast<uint8_t>(x); a.k_h = static_cast<uint8_t>(y);
      require(std::sscanf(need("s").c_str(), "%ux%u", &x, &y) == 2, ErrCode::Encoding,
              "bad s field");
      a.s_w = static_cast<uint8_t>(x); a.s_h = static_cast<uint8_t>(y);
      a.dilation = static_cast<uint8_t>(std::stoi(need("d")));
      auto pads = split_ints(need("pad"), ',');
      require(pads.size() == 4, ErrCode::Encoding, "bad pad field");
      a.pad_top = static_cast<int16_t>(pads[0]);
      a.pad_left = static_cast<int16_t>(pads[1]);
      a.pad_bottom = static_cast<int16_t>(pads[2]);
      a.pad_right = static_cast<int16_t>(pads[3]);
      const std::string& mode = need("mode");
      a.mode = mode == "conv" ? 0 : mode == "dw" ? 1 : 2;
      a.accumulate = static_cast<uint8_t>(std::stoi(need("acc")));
      a.requant = static_cast<uint8_t>(std::stoi(need("rq")));
      a.relu = static_cast<uint8_t>(std::stoi(need("relu")));
      a.bias_shift = static_cast<int8_t>(std::stoi(need("bsh")));
      a.out_shift = static_cast<int8_t>(std::stoi(need("osh")));
      ins.args = a;
    } else if (op == "POOL") {
      ins.kind = InstrKind::Pool;
      PoolArgs a;
      ins.reads = {parse_region(need("in"))};
      ins.write = parse_region(need("out"));
      unsigned iw, ih, ow, oh, c;
      require(std::sscanf(need("io").c_str(), "%ux%u:%ux%ux%u", &iw, &ih, &ow, &oh, &c) ==
                  5,
              ErrCode::Encoding, "bad io field");
      a.in_w = iw; a.in_h = ih; a.out_w = ow; a.out_h = oh; a.channels = c;
      unsigned x, y;
      require(std::sscanf(need("k").c_str(), "%ux%u", &x, &y) == 2, ErrCode::Encoding,
              "bad k field");
      a.k_w = static_cast<uint8_t>(x); a.k_h = static_cast<uint8_t>(y);
      require(std::sscanf(need("s").c_str(), "%ux%u", &x, &y) == 2, ErrCode::Encoding,
              "bad s field");
      a.s_w = static_cast<uint8_t>(x); a.s_h = static_cast<uint8_t>(y);
      auto pads = split_ints(need("pad"), ',');
      require(pads.size() == 4, ErrCode::Encoding, "bad pad field");
      a.pad_top = static_cast<int16_t>(pads[0]);
      a.pad_left = static_cast<int16_t>(pads[1]);
      a.pad_bottom = static_cast<int16_t>(pads[2]);
      a.pad_right = static_cast<int16_t>(pads[3]);
      a.avg = need("type") == "avg";
      a.out_shift = static_cast<int8_t>(std::stoi(need("osh")));
      ins.args = a;
    } else if (op == "MISC") {
      ins.kind = InstrKind::Misc;
      auto misc = misc_from_name(need("op"));
      require(misc.has_value(), ErrCode::Encoding, "bad misc op");
      ins.misc = *misc;
      if (ins.misc == MiscOp::Eltwise) {
        EltwiseArgs a;
        a.elems = static_cast<uint32_t>(std::stoul(need("elems")));
        a.arity = static_cast<uint8_t>(std::stoi(need("arity")));
        a.relu = static_cast<uint8_t>(std::stoi(need("relu")));
        auto shifts = split_ints(need("ish"), ',');
        require(shifts.size() == a.arity, ErrCode::Encoding, "bad ish field");
        for (size_t i = 0; i < shifts.size(); ++i)
          a.in_shift[i] = static_cast<int8_t>(shifts[i]);
        a.out_shift = static_cast<int8_t>(std::stoi(need("osh")));
        for (int i = 0; i < a.arity; ++i)
          ins.reads.push_back(parse_region(need(("in" + std::to_string(i)).c_str())));
        ins.write = parse_region(need("out"));
        ins.args = a;
      } else if (ins.misc == MiscOp::Reorg) {
        ReorgArgs a;
        ins.reads = {parse_region(need("in"))};
        ins.write = parse_region(need("out"));
        unsigned w, h, c;
        require(std::sscanf(need("io").c_str(), "%ux%ux%u", &w, &h, &c) == 3,
                ErrCode::Encoding, "bad io field");
        a.in_w = w; a.in_h = h; a.in_c = c;
        a.stride = static_cast<uint8_t>(std::stoi(need("stride")));
        ins.args = a;
      }
    } else {
      fail(ErrCode::Encoding, "unknown opcode " + op);
    }
    out.push_back(std::move(ins));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary form.

namespace {

struct Writer {
  std::vector<uint8_t> buf;
  void u8(uint8_t v) { buf.push_back(v); }
  void i8(int8_t v) { buf.push_back(static_cast<uint8_t>(v)); }
  void u16(uint16_t v) {
    buf.push_back(v & 0xff);
    buf.push_back(v >> 8);
  }
  void i16(int16_t v) { u16(static_cast<uint16_t>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xff);
  }
  void pattern(const Pattern& p) {
    u32(p.base); u32(p.n0); u32(p.s0); u32(p.n1); u32(p.s1); u32(p.run);
  }
  void region(const Region& r) {
    u8(static_cast<uint8_t>(r.space));
    pattern(r.pat);
  }
};

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t at = 0;
  void check(size_t n) {
    require(at + n <= buf.size(), ErrCode::Encoding, "truncated binary stream");
  }
  uint8_t u8() {
    check(1);
    return buf[at++];
  }
  int8_t i8() { return static_cast<int8_t>(u8()); }
  uint16_t u16() {
    check(2);
    uint16_t v = buf[at] | (buf[at + 1] << 8);
    at += 2;
    return v;
  }
  int16_t i16() { return static_cast<int16_t>(u16()); }
  uint32_t u32() {
    check(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(buf[at + i]) << (8 * i);
    at += 4;
    return v;
  }
  Pattern pattern() {
    Pattern p;
    p.base = u32(); p.n0 = u32(); p.s0 = u32(); p.n1 = u32(); p.s1 = u32(); p.run = u32();
    return p;
  }
  Region region() {
    Region r;
    r.space = static_cast<Space>(u8());
    r.pat = pattern();
    return r;
  }
};

}  // namespace

std::vector<uint8_t> encode_binary(const Stream& s) {
  std::vector<uint8_t> out;
  for (const Instruction& ins : s) {
    Writer w;
    w.u32(ins.seq);
    if (ins.kind == InstrKind::Misc) w.u8(static_cast<uint8_t>(ins.misc));
    w.u8(static_cast<uint8_t>(ins.reads.size()));
    for (const Region& r : ins.reads) w.region(r);
    w.u8(ins.write.has_value() ? 1 : 0);
    if (ins.write) w.region(*ins.write);
    switch (ins.kind) {
      case InstrKind::Conv: {
        const auto& a = std::get<ConvArgs>(ins.args);
        w.u16(a.in_w); w.u16(a.in_h); w.u16(a.in_c);
        w.u16(a.out_w); w.u16(a.out_h); w.u16(a.out_c);
        w.u8(a.k_w); w.u8(a.k_h); w.u8(a.s_w); w.u8(a.s_h); w.u8(a.dilation);
        w.u8(a.mode);
        w.i16(a.pad_top); w.i16(a.pad_left); w.i16(a.pad_bottom); w.i16(a.pad_right);
        w.u8(a.relu); w.u8(a.accumulate); w.u8(a.requant); w.u8(a.has_bias);
        w.i8(a.bias_shift); w.i8(a.out_shift);
        break;
      }
      case InstrKind::Pool: {
        const auto& a = std::get<PoolArgs>(ins.args);
        w.u16(a.in_w); w.u16(a.in_h); w.u16(a.out_w); w.u16(a.out_h); w.u16(a.channels);
        w.u8(a.k_w); w.u8(a.k_h); w.u8(a.s_w); w.u8(a.s_h);
        w.i16(a.pad_top); w.i16(a.pad_left); w.i16(a.pad_bottom); w.i16(a.pad_right);
        w.u8(a.avg);
        w.i8(a.out_shift);
        break;
      }
      case InstrKind::Misc: {
        if (ins.misc == MiscOp::Eltwise) {
          const auto& a = std::get<EltwiseArgs>(ins.args);
          w.u32(a.elems);
          w.u8(a.arity); w.u8(a.relu);
          for (int i = 0; i < 4; ++i) w.i8(a.in_shift[i]);
          w.i8(a.out_shift);
        } else if (ins.misc == MiscOp::Reorg) {
          const auto& a = std::get<ReorgArgs>(ins.args);
          w.u16(a.in_w); w.u16(a.in_h); w.u16(a.in_c);
          w.u8(a.stride);
        }
        break;
      }
      default:
        break;
    }
    w.u8(static_cast<uint8_t>(ins.deps.size()));
    for (uint32_t d : ins.deps) w.u32(d);

    require(w.buf.size() <= 255, ErrCode::Encoding,
            "instruction payload exceeds the one-byte length field (seq " +
                std::to_string(ins.seq) + ")");
    out.push_back(static_cast<uint8_t>(ins.kind));
    out.push_back(static_cast<uint8_t>(w.buf.size()));
    out.insert(out.end(), w.buf.begin(), w.buf.end());
  }
  return out;
}

Stream decode_binary(const std::vector<uint8_t>& bytes) {
  Stream out;
  size_t at = 0;
  while (at < bytes.size()) {
    require(at + 2 <= bytes.size(), ErrCode::Encoding, "truncated record header");
    auto kind = static_cast<InstrKind>(bytes[at]);
    size_t len = bytes[at + 1];
    require(at + 2 + len <= bytes.size(), ErrCode::Encoding, "truncated record payload");
    std::vector<uint8_t> payload(bytes.begin() + at + 2, bytes.begin() + at + 2 + len);
    at += 2 + len;

    Reader r{payload};
    Instruction ins;
    ins.kind = kind;
    ins.seq = r.u32();
    if (kind == InstrKind::Misc) ins.misc = static_cast<MiscOp>(r.u8());
    size_t n_reads = r.u8();
    for (size_t i = 0; i < n_reads; ++i) ins.reads.push_back(r.region());
    if (r.u8()) ins.write = r.region();
    switch (kind) {
      case InstrKind::Conv: {
        ConvArgs a;
        a.in_w = r.u16(); a.in_h = r.u16(); a.in_c = r.u16();
        a.out_w = r.u16(); a.out_h = r.u16(); a.out_c = r.u16();
        a.k_w = r.u8(); a.k_h = r.u8(); a.s_w = r.u8(); a.s_h = r.u8();
        a.dilation = r.u8();
        a.mode = r.u8();
        a.pad_top = r.i16(); a.pad_left = r.i16(); a.pad_bottom = r.i16();
        a.pad_right = r.i16();
        a.relu = r.u8(); a.accumulate = r.u8(); a.requant = r.u8(); a.has_bias = r.u8();
        a.bias_shift = r.i8(); a.out_shift = r.i8();
        ins.args = a;
        break;
      }
      case InstrKind::Pool: {
        PoolArgs a;
        a.in_w = r.u16(); a.in_h = r.u16(); a.out_w = r.u16(); a.out_h = r.u16();
        a.channels = r.u16();
        a.k_w = r.u8(); a.k_h = r.u8(); a.s_w = r.u8(); a.s_h = r.u8();
        a.pad_top = r.i16(); a.pad_left = r.i16(); a.pad_bottom = r.i16();
        a.pad_right = r.i16();
        a.avg = r.u8();
        a.out_shift = r.i8();
        ins.args = a;
        break;
      }
      case InstrKind::Misc: {
        if (ins.misc == MiscOp::Eltwise) {
          EltwiseArgs a;
          a.elems = r.u32();
          a.arity = r.u8(); a.relu = r.u8();
          for (int i = 0; i < 4; ++i) a.in_shift[i] = r.i8();
          a.out_shift = r.i8();
          ins.args = a;
        } else if (ins.misc == MiscOp::Reorg) {
          ReorgArgs a;
          a.in_w = r.u16(); a.in_h = r.u16(); a.in_c = r.u16();
          a.stride = r.u8();
          ins.args = a;
        }
        break;
      }
      default:
        break;
    }
    size_t n_deps = r.u8();
    for (size_t i = 0; i < n_deps; ++i) ins.deps.push_back(r.u32());
    require(r.at == payload.size(), ErrCode::Encoding, "trailing bytes in record");
    out.push_back(std::move(ins));
  }
  return out;
}

}  // namespace xgc
