#include "p2p/membership.hpp"

#include <algorithm>
#include <cmath>

#include "p2p/errors.hpp"

namespace p2p {

void PeerCache::touch(NodeId id, double now) {
    remove(id);
    entries_.insert(entries_.begin(), Entry{id, now});
    if (entries_.size() > capacity_)
        entries_.resize(capacity_);
}

void PeerCache::remove(NodeId id) {
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const Entry& e) { return e.id == id; }),
                   entries_.end());
}

std::optional<NodeId> bootstrap_peer_based(PeerCache& cache,
                                           const std::function<bool(NodeId)>& probe,
                                           std::size_t* probes_out) {
    std::size_t probes = 0;
    std::vector<NodeId> dead;
    std::optional<NodeId> found;
    for (const auto& entry : cache.entries()) {
        ++probes;
        if (probe(entry.id)) {
            found = entry.id;
            break;
        }
        dead.push_back(entry.id);
    }
    for (NodeId d : dead)
        cache.remove(d);
    if (probes_out)
        *probes_out = probes;
    return found;
}

std::vector<NodeId> Mediator::bootstrap(NodeId joiner, Rng& rng) {
    std::vector<NodeId> pool(online_.begin(), online_.end());
    pool.erase(std::remove(pool.begin(), pool.end(), joiner), pool.end());
    std::vector<NodeId> handout = rng.sample(pool, handout_size_);
    online_.insert(joiner);
    return handout;
}

bool join_group(Group& g, NodeId candidate, const std::vector<Ballot>& votes) {
    if (g.members.count(candidate))
        throw AlreadyMember("candidate already in group");
    bool accept = false;
    switch (g.policy) {
    case GroupPolicy::Open:
        accept = true;
        break;
    case GroupPolicy::Monarchy:
        accept = std::any_of(votes.begin(), votes.end(), [&](const Ballot& b) {
            return b.yes && g.owners.count(b.voter) > 0;
        });
        break;
    case GroupPolicy::Voting: {
        std::size_t yes = 0;
        for (const Ballot& b : votes)
            if (b.yes && g.members.count(b.voter) > 0)
                ++yes;
        const std::size_t needed =
            static_cast<std::size_t>(std::ceil(g.quorum * double(g.members.size())));
        accept = yes >= needed;
        break;
    }
    }
    if (accept)
        g.members.insert(candidate);
    return accept;
}

bool scope_deliver(const Message& msg, const Group& g, NodeId receiver) {
    if (!msg.group_tag.has_value())
        return true;
    return *msg.group_tag == g.group_id && g.members.count(receiver) > 0;
}

void DescriptorStore::put(const Descriptor& d) { entries_[d.key][d.owner] = d; }

std::vector<Descriptor> DescriptorStore::get(ResourceKey key, double now) const {
    std::vector<Descriptor> out;
    const auto it = entries_.find(key);
    if (it == entries_.end())
        return out;
    for (const auto& [owner, d] : it->second)
        if (!d.expired(now))
            out.push_back(d);
    return out;
}

std::vector<Descriptor> DescriptorStore::all(double now) const {
    std::vector<Descriptor> out;
    for (const auto& [key, by_owner] : entries_)
        for (const auto& [owner, d] : by_owner)
            if (!d.expired(now))
                out.push_back(d);
    return out;
}

void DescriptorStore::erase_owner(NodeId owner) {
    for (auto it = entries_.begin(); it != entries_.end();) {
        it->second.erase(owner);
        it = it->second.empty() ? entries_.erase(it) : std::next(it);
    }
}

void DescriptorStore::evict_expired(double now) {
    for (auto it = entries_.begin(); it != entries_.end();) {
        auto& by_owner = it->second;
        for (auto jt = by_owner.begin(); jt != by_owner.end();) {
            jt = jt->second.expired(now) ? by_owner.erase(jt) : std::next(jt);
        }
        it = by_owner.empty() ? entries_.erase(it) : std::next(it);
    }
}

} // namespace p2p
