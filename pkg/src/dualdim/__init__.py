"""dualdim: joint training of a semantic parser and an NL generator.

The two sequence-to-sequence models are coupled through variational
lower bounds on their expected joint distributions, estimated with
REINFORCE over beam-search candidate pools, with optional use of
unlabeled data on either side.
"""

__version__ = "0.1.0"
