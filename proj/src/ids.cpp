#include "p2p/ids.hpp"

namespace p2p {

std::vector<NodeId> assign_node_ids(std::size_t count, const KeySpace& ks, Rng& rng) {
    if (!ks.valid())
        throw InvalidParams("assign_node_ids: invalid key space");
    if (ks.m_bits < 64 && count > (std::uint64_t(1) << ks.m_bits))
        throw InvalidParams("assign_node_ids: more nodes than identifiers");
    std::set<std::uint64_t> used;
    std::vector<NodeId> out;
    out.reserve(count);
    while (out.size() < count) {
        const std::uint64_t v = ks.reduce(rng.next());
        if (used.insert(v).second)
            out.push_back(NodeId{v});
    }
    return out;
}

} // namespace p2p
