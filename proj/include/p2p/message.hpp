#ifndef P2P_MESSAGE_HPP
#define P2P_MESSAGE_HPP

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "p2p/ids.hpp"

namespace p2p {

enum class MsgKind {
    Ping,
    Pong,
    Query,
    QueryHit,
    Put,
    Store,
    Get,
    Lookup,
    Notify,
    ChunkRequest,
    ChunkData,
    // control traffic
    Interested,
    NotInterested,
    Choke,
    Unchoke,
    Have,
    Bitfield,
    Cancel,
};

struct QueryPayload {
    ResourceKey key;
};

struct QueryHitPayload {
    std::uint64_t query_msg_id = 0;
    ResourceKey key;
    NodeId provider;
    std::vector<Descriptor> hits;
    int hops = 0;
    bool stale = false; // answered from a response cache
};

struct PutPayload {
    Descriptor descriptor;
};

struct GetPayload {
    ResourceKey key;
};

struct NotifyPayload {
    Descriptor descriptor;
};

struct PongPayload {
    NodeId responder;
    std::uint64_t ping_msg_id = 0;
};

struct ChunkRequestPayload {
    std::uint32_t piece = 0;
    std::uint32_t block = 0;
};

struct ChunkDataPayload {
    std::uint32_t piece = 0;
    std::uint32_t block = 0;
    std::uint32_t bytes = 0;
    bool corrupt = false;
};

struct HavePayload {
    std::uint32_t piece = 0;
};

struct BitfieldPayload {
    std::vector<bool> have;
};

using Payload = std::variant<std::monostate, QueryPayload, QueryHitPayload, PutPayload,
                             GetPayload, NotifyPayload, PongPayload, ChunkRequestPayload,
                             ChunkDataPayload, HavePayload, BitfieldPayload>;

// Routed envelope. msg_id is unique per originated message; forwarded copies
// keep it, which is what duplicate suppression keys on. hop_from is transport
// metadata: the immediate sender of this copy, not the originator.
struct Message {
    std::uint64_t msg_id = 0;
    MsgKind kind = MsgKind::Ping;
    std::optional<int> ttl;
    std::optional<std::uint64_t> group_tag;
    NodeId src;
    NodeId hop_from;
    Payload payload;
};

} // namespace p2p

#endif
