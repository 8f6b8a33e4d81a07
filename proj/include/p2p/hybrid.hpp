#ifndef P2P_HYBRID_HPP
#define P2P_HYBRID_HPP

#include <map>
#include <set>
#include <vector>

#include "p2p/ids.hpp"
#include "p2p/rng.hpp"

namespace p2p {

// Central publish/search index (eMule-style). Providers listed in the
// catalog are always currently registered peers.
class IndexServer {
public:
    explicit IndexServer(std::size_t offer_limit = 200) : offer_limit_(offer_limit) {}

    void register_peer(NodeId peer) { registered_.insert(peer); }
    bool is_registered(NodeId peer) const { return registered_.count(peer) != 0; }

    // Accepts at most offer_limit descriptors; a re-offer replaces the
    // peer's previous catalog entries. Throws NotRegistered.
    std::size_t offer_files(NodeId peer, const std::vector<Descriptor>& descriptors);

    // Owner-side update notification (HmNotify consistency variation).
    void notify_update(NodeId peer, const Descriptor& d);

    std::vector<NodeId> search_key(ResourceKey key) const;
    std::vector<NodeId> search_digest(const Digest& digest) const;
    std::vector<Descriptor> descriptors_for(ResourceKey key) const;

    void unregister_peer(NodeId peer);
    void on_peer_leave(NodeId peer) { unregister_peer(peer); }

    std::size_t offer_limit() const { return offer_limit_; }
    std::uint64_t rejected_offers() const { return rejected_offers_; }
    std::size_t catalog_size() const;

private:
    std::size_t offer_limit_;
    std::set<NodeId> registered_;
    // key -> provider -> descriptor
    std::map<ResourceKey, std::map<NodeId, Descriptor>> catalog_;
    std::uint64_t rejected_offers_ = 0;
};

// Tracker-style mediator keeping one swarm registry per published content.
class Tracker {
public:
    explicit Tracker(std::size_t handout = 20) : handout_(handout) {}

    void publish(const Digest& content);
    bool knows(const Digest& content) const { return torrents_.count(content) != 0; }

    // Adds the peer to the swarm and returns up to `handout` current members,
    // sampled without replacement, never including the peer itself.
    // Throws UnknownTorrent.
    std::vector<NodeId> announce(NodeId peer, const Digest& content, Rng& rng);

    void depart(NodeId peer, const Digest& content);
    void on_peer_leave(NodeId peer);

    const std::set<NodeId>& swarm(const Digest& content) const;
    std::size_t handout() const { return handout_; }

private:
    std::size_t handout_;
    std::map<Digest, std::set<NodeId>> torrents_;
};

} // namespace p2p

#endif
