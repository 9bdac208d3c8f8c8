"""
Electing a parent from query replies
====================================

Node 5 saw five incoming connections before the outbreak.  Two senders
(14, 16) were never infected, node 6 was infected only *after* it talked
to node 5, and nodes 2 and 3 were both infected before attacking.
"""

from wormtrace import Candidate, Reply, select_parent_extended, select_parent_origins

# (source, connection time, reply) in window order
candidates = [
    Candidate(14, 30, Reply.no()),
    Candidate(16, 40, Reply.no()),
    Candidate(6, 50, Reply.yes(100)),
    Candidate(2, 60, Reply.yes(10)),
    Candidate(3, 80, Reply.yes(20)),
]

# The baseline rule takes the first "Yes" in the window -- node 6, whose
# connection predates its own infection and so cannot have carried the worm.
print("first-yes rule :", select_parent_origins(candidates))

# The extended rule keeps only connections made at or after the sender's
# infection, then takes the earliest of those: node 2.
print("extended rule  :", select_parent_extended(candidates))

# With no qualifying sender the host is reported as an origin.
print("all No         :", select_parent_extended([Candidate(14, 30, Reply.no())]))
