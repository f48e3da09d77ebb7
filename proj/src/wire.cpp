#include "mocsim/wire.hpp"

#include <stdexcept>

#include "mocsim/bytes.hpp"

namespace mocsim {

namespace {

void put_path(ByteWriter& w, const SemanticPath& p) {
    if (p.layer() > UINT8_MAX) throw std::length_error("path too deep for wire");
    w.put_u8(static_cast<uint8_t>(p.layer()));
    for (const auto& v : p.values) w.put_string(v);
}

SemanticPath get_path(ByteReader& r) {
    const uint8_t n = r.get_u8();
    SemanticPath p;
    for (uint8_t i = 0; i < n; ++i) p.values.push_back(r.get_string());
    return p;
}

uint64_t path_bytes(const SemanticPath& p) {
    uint64_t n = 1;
    for (const auto& v : p.values) n += 2 + v.size();
    return n;
}

// model meta + stats, then zero padding of weight_bytes
void put_model(ByteWriter& w, const ExpertModel& m) {
    put_path(w, m.home);
    w.put_u32(m.version);
    w.put_f64(m.quality);
    w.put_u64(m.weight_bytes);
    const std::vector<uint8_t> stats = m.version == 0 ? std::vector<uint8_t>{} : m.stats.encode();
    if (stats.size() > UINT32_MAX) throw std::length_error("stats blob too large");
    w.put_u32(static_cast<uint32_t>(stats.size()));
    w.put_bytes(stats.data(), stats.size());
    w.put_zeros(m.weight_bytes);
}

ExpertModel get_model(ByteReader& r) {
    ExpertModel m;
    m.home = get_path(r);
    m.version = r.get_u32();
    m.quality = r.get_f64();
    m.weight_bytes = r.get_u64();
    const uint32_t stats_len = r.get_u32();
    if (stats_len > 0) {
        std::vector<uint8_t> blob(stats_len);
        for (uint32_t i = 0; i < stats_len; ++i) blob[i] = r.get_u8();
        m.stats = GaussianStats::decode(blob);
    }
    r.skip(m.weight_bytes); // weight padding carries no information
    return m;
}

uint64_t model_bytes(const ExpertModel& m) {
    const uint64_t stats_len = m.version == 0 ? 0 : m.stats.encode().size();
    return path_bytes(m.home) + 4 + 8 + 8 + 4 + stats_len + m.weight_bytes;
}

struct PayloadSize {
    uint64_t operator()(const Hello&) const { return 0; }
    uint64_t operator()(const FrameBatchUpload& v) const { return 4 + 2 + 8 + 8 + v.payload_bytes; }
    uint64_t operator()(const DomainVerdict& v) const {
        return 1 + path_bytes(v.domain) + 2 + 2ull * v.labels.size();
    }
    uint64_t operator()(const ModelRequest& v) const { return path_bytes(v.domain); }
    uint64_t operator()(const ModelDispatch& v) const { return model_bytes(v.model); }
    uint64_t operator()(const TaxonomySync& v) const { return v.table.size(); }
    uint64_t operator()(const WindowReport& v) const { return 4 + path_bytes(v.domain) + 8; }
    uint64_t operator()(const RetrainNotice& v) const { return path_bytes(v.domain) + 4; }
};

struct PayloadEncode {
    ByteWriter& w;
    void operator()(const Hello&) const {}
    void operator()(const FrameBatchUpload& v) const {
        w.put_u32(v.window_id);
        w.put_u16(v.frame_count);
        w.put_u64(v.truth_handle);
        w.put_u64(v.payload_bytes);
        w.put_zeros(v.payload_bytes);
    }
    void operator()(const DomainVerdict& v) const {
        w.put_u8(v.shift_confirmed ? 1 : 0);
        put_path(w, v.domain);
        if (v.labels.size() > UINT16_MAX) throw std::length_error("too many labels");
        w.put_u16(static_cast<uint16_t>(v.labels.size()));
        for (uint16_t l : v.labels) w.put_u16(l);
    }
    void operator()(const ModelRequest& v) const { put_path(w, v.domain); }
    void operator()(const ModelDispatch& v) const { put_model(w, v.model); }
    void operator()(const TaxonomySync& v) const { w.put_bytes(v.table.data(), v.table.size()); }
    void operator()(const WindowReport& v) const {
        w.put_u32(v.window_id);
        put_path(w, v.domain);
        w.put_f64(v.accuracy);
    }
    void operator()(const RetrainNotice& v) const {
        put_path(w, v.domain);
        w.put_u32(v.known_version);
    }
};

} // namespace

MsgType message_type(const WireMessage& m) {
    return static_cast<MsgType>(m.payload.index());
}

const char* message_type_name(MsgType t) {
    switch (t) {
        case MsgType::Hello: return "Hello";
        case MsgType::FrameBatchUpload: return "FrameBatchUpload";
        case MsgType::DomainVerdict: return "DomainVerdict";
        case MsgType::ModelRequest: return "ModelRequest";
        case MsgType::ModelDispatch: return "ModelDispatch";
        case MsgType::TaxonomySync: return "TaxonomySync";
        case MsgType::WindowReport: return "WindowReport";
        case MsgType::RetrainNotice: return "RetrainNotice";
    }
    return "?";
}

uint64_t wire_size(const WireMessage& m) {
    return kFrameHeaderBytes + std::visit(PayloadSize{}, m.payload);
}

std::vector<uint8_t> encode_frame(const WireMessage& m) {
    const uint64_t payload_len = std::visit(PayloadSize{}, m.payload);
    if (payload_len > UINT32_MAX) throw std::length_error("payload exceeds frame limit");
    ByteWriter w;
    w.put_u32(kWireMagic);
    w.put_u8(static_cast<uint8_t>(m.payload.index()));
    w.put_u64(m.device_id);
    w.put_u32(static_cast<uint32_t>(payload_len));
    std::visit(PayloadEncode{w}, m.payload);
    return w.take();
}

WireMessage decode_frame(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.get_u32() != kWireMagic) throw decode_error(0, "bad magic");
    const uint8_t type = r.get_u8();
    if (type > static_cast<uint8_t>(MsgType::RetrainNotice))
        throw decode_error(4, "unknown message type");
    WireMessage m;
    m.device_id = r.get_u64();
    const uint32_t payload_len = r.get_u32();
    if (r.remaining() != payload_len)
        throw decode_error(r.pos(), "payload length mismatch");

    switch (static_cast<MsgType>(type)) {
        case MsgType::Hello:
            m.payload = Hello{};
            break;
        case MsgType::FrameBatchUpload: {
            FrameBatchUpload v;
            v.window_id = r.get_u32();
            v.frame_count = r.get_u16();
            v.truth_handle = r.get_u64();
            v.payload_bytes = r.get_u64();
            r.skip(v.payload_bytes);
            m.payload = v;
            break;
        }
        case MsgType::DomainVerdict: {
            DomainVerdict v;
            v.shift_confirmed = r.get_u8() != 0;
            v.domain = get_path(r);
            const uint16_t n = r.get_u16();
            for (uint16_t i = 0; i < n; ++i) v.labels.push_back(r.get_u16());
            m.payload = v;
            break;
        }
        case MsgType::ModelRequest:
            m.payload = ModelRequest{get_path(r)};
            break;
        case MsgType::ModelDispatch:
            m.payload = ModelDispatch{get_model(r)};
            break;
        case MsgType::TaxonomySync: {
            TaxonomySync v;
            v.table.resize(r.remaining());
            for (auto& b : v.table) b = r.get_u8();
            m.payload = v;
            break;
        }
        case MsgType::WindowReport: {
            WindowReport v;
            v.window_id = r.get_u32();
            v.domain = get_path(r);
            v.accuracy = r.get_f64();
            m.payload = v;
            break;
        }
        case MsgType::RetrainNotice: {
            RetrainNotice v;
            v.domain = get_path(r);
            v.known_version = r.get_u32();
            m.payload = v;
            break;
        }
    }
    if (!r.at_end()) throw decode_error(r.pos(), "trailing bytes after payload");
    return m;
}

void FrameParser::feed(const uint8_t* data, size_t n) {
    buf_.insert(buf_.end(), data, data + n);
}

bool FrameParser::next(WireMessage& out) {
    if (buf_.size() < kFrameHeaderBytes) return false;
    ByteReader r(buf_.data(), kFrameHeaderBytes);
    if (r.get_u32() != kWireMagic) throw decode_error(0, "bad magic in stream");
    r.get_u8();
    r.get_u64();
    const uint32_t payload_len = r.get_u32();
    const size_t total = kFrameHeaderBytes + payload_len;
    if (buf_.size() < total) return false;
    std::vector<uint8_t> frame(buf_.begin(), buf_.begin() + static_cast<long>(total));
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(total));
    out = decode_frame(frame);
    return true;
}

} // namespace mocsim
