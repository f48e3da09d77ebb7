#ifndef MOCSIM_WIRE_H
#define MOCSIM_WIRE_H

#include <cstdint>
#include <variant>
#include <vector>

#include "mocsim/world.hpp"

namespace mocsim {

/*
 * Device <-> cloud wire protocol.
 *
 * Every message travels as one frame:
 *
 *   u32 magic 0x4D4F4348 | u8 type | u64 device id | u32 payload length | payload
 *
 * integers big-endian.  The device id names the sending device on the
 * uplink and the addressed device on the downlink; the hello handshake
 * (type 0, id 0) asks the cloud to assign one.
 *
 * Paths are encoded as: u8 value count, then per value u16 length + UTF-8
 * bytes.  Bulk payloads (frame batches, model weights) carry explicit byte
 * sizes and are padded with zeros to that size, so the frame length on the
 * wire matches what a real deployment would push through the link.
 */

constexpr uint32_t kWireMagic = 0x4D4F4348u;
constexpr size_t kFrameHeaderBytes = 4 + 1 + 8 + 4;

enum class MsgType : uint8_t {
    Hello = 0,
    FrameBatchUpload = 1,
    DomainVerdict = 2,
    ModelRequest = 3,
    ModelDispatch = 4,
    TaxonomySync = 5,
    WindowReport = 6,
    RetrainNotice = 7,
};

struct Hello {}; // empty payload; the assigned id rides in the frame header

struct FrameBatchUpload {
    uint32_t window_id = 0;
    uint16_t frame_count = 0;
    uint64_t truth_handle = 0; // opaque; lets world mocks find ground truth
    uint64_t payload_bytes = 0; // frame bytes simulated on the link (zero padding)
};

struct DomainVerdict {
    bool shift_confirmed = false;
    SemanticPath domain;          // discriminated domain
    std::vector<uint16_t> labels; // annotated labels for the uploaded samples
};

struct ModelRequest {
    SemanticPath domain;
};

// version 0 doubles as a negative acknowledgement (no model for the path)
struct ModelDispatch {
    ExpertModel model;
    bool is_nack() const { return model.version == 0; }
};

struct TaxonomySync {
    std::vector<uint8_t> table; // TaxonomyTree::encode_table bytes
};

struct WindowReport {
    uint32_t window_id = 0;
    SemanticPath domain;   // active domain during the window
    double accuracy = 0.0; // finalized window accuracy
};

struct RetrainNotice {
    SemanticPath domain;
    uint32_t known_version = 0; // newest version the device has for the domain
};

using Payload = std::variant<Hello, FrameBatchUpload, DomainVerdict, ModelRequest,
                             ModelDispatch, TaxonomySync, WindowReport, RetrainNotice>;

struct WireMessage {
    uint64_t device_id = 0;
    Payload payload;
};

MsgType message_type(const WireMessage& m);
const char* message_type_name(MsgType t);

// exact encoded frame length, computed without materializing padding
uint64_t wire_size(const WireMessage& m);

std::vector<uint8_t> encode_frame(const WireMessage& m);

// decode one complete frame; throws decode_error on malformed input
WireMessage decode_frame(const std::vector<uint8_t>& bytes);

/*
 * Incremental frame extraction for stream transports: appends raw bytes,
 * yields complete messages as they become available.
 */
class FrameParser {
public:
    void feed(const uint8_t* data, size_t n);
    bool next(WireMessage& out); // false when no complete frame is buffered

private:
    std::vector<uint8_t> buf_;
};

} // namespace mocsim

#endif // MOCSIM_WIRE_H
