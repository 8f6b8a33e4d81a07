#include "p2p/hybrid.hpp"

#include "p2p/errors.hpp"

namespace p2p {

std::size_t IndexServer::offer_files(NodeId peer, const std::vector<Descriptor>& descriptors) {
    if (!is_registered(peer))
        throw NotRegistered("offer-files from unregistered peer " + std::to_string(peer.value));
    // re-offer replaces whatever this peer had in the catalog
    for (auto it = catalog_.begin(); it != catalog_.end();) {
        it->second.erase(peer);
        it = it->second.empty() ? catalog_.erase(it) : std::next(it);
    }
    std::size_t accepted = 0;
    for (const Descriptor& d : descriptors) {
        if (accepted >= offer_limit_) {
            rejected_offers_++;
            continue;
        }
        catalog_[d.key][peer] = d;
        ++accepted;
    }
    return accepted;
}

void IndexServer::notify_update(NodeId peer, const Descriptor& d) {
    if (!is_registered(peer))
        throw NotRegistered("update from unregistered peer");
    catalog_[d.key][peer] = d;
}

std::vector<NodeId> IndexServer::search_key(ResourceKey key) const {
    std::vector<NodeId> out;
    const auto it = catalog_.find(key);
    if (it == catalog_.end())
        return out;
    for (const auto& [peer, d] : it->second)
        out.push_back(peer);
    return out;
}

std::vector<NodeId> IndexServer::search_digest(const Digest& digest) const {
    std::set<NodeId> providers;
    for (const auto& [key, by_peer] : catalog_)
        for (const auto& [peer, d] : by_peer)
            if (d.content_digest == digest)
                providers.insert(peer);
    return std::vector<NodeId>(providers.begin(), providers.end());
}

std::vector<Descriptor> IndexServer::descriptors_for(ResourceKey key) const {
    std::vector<Descriptor> out;
    const auto it = catalog_.find(key);
    if (it == catalog_.end())
        return out;
    for (const auto& [peer, d] : it->second)
        out.push_back(d);
    return out;
}

void IndexServer::unregister_peer(NodeId peer) {
    registered_.erase(peer);
    for (auto it = catalog_.begin(); it != catalog_.end();) {
        it->second.erase(peer);
        it = it->second.empty() ? catalog_.erase(it) : std::next(it);
    }
}

std::size_t IndexServer::catalog_size() const {
    std::size_t n = 0;
    for (const auto& [key, by_peer] : catalog_)
        n += by_peer.size();
    return n;
}

void Tracker::publish(const Digest& content) { torrents_[content]; }

std::vector<NodeId> Tracker::announce(NodeId peer, const Digest& content, Rng& rng) {
    const auto it = torrents_.find(content);
    if (it == torrents_.end())
        throw UnknownTorrent("announce for unpublished content");
    std::vector<NodeId> pool;
    for (NodeId member : it->second)
        if (member != peer)
            pool.push_back(member);
    it->second.insert(peer);
    return rng.sample(pool, handout_);
}

void Tracker::depart(NodeId peer, const Digest& content) {
    const auto it = torrents_.find(content);
    if (it != torrents_.end())
        it->second.erase(peer);
}

void Tracker::on_peer_leave(NodeId peer) {
    for (auto& [content, swarm] : torrents_)
        swarm.erase(peer);
}

const std::set<NodeId>& Tracker::swarm(const Digest& content) const {
    const auto it = torrents_.find(content);
    if (it == torrents_.end())
        throw UnknownTorrent("swarm of unpublished content");
    return it->second;
}

} // namespace p2p
