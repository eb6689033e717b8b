"""
Scoring the three case studies
==============================

Three pieces of content, three platforms, three vocabularies. Each one is
reduced to interaction counts, weighted, divided by the number of attacker
transmissions and placed on the grading scale.
"""

from cogmetric import Grade, InteractionCounts, assess
from cogmetric.analysis import render_table

# A single Instagram post (t = 1): only likes and comments were visible.
instagram = assess(InteractionCounts(like=37908, comment=650), transmissions=1)

# A whole YouTube account graded at once: 106 uploads, total views only.
youtube = assess(InteractionCounts(view=86604097), transmissions=106)

# One Facebook video post; reactions are counted as likes.
facebook = assess(InteractionCounts(like=137, comment=7, share=6), transmissions=1)

print(render_table([("instagram post", instagram), ("youtube account", youtube), ("facebook post", facebook)]))

###############################################################################
# The YouTube account divides 8,660,409.7 by 106. Done exactly that is
# 81,701.98, which is eight completed multiples of 10,000: viral x8.

print()
print(f"youtube E = {youtube.effectiveness!r}, viral x{youtube.viral_multiplier}")

###############################################################################
# Anything graded A or A+ is flagged for review.

for name, a in [("instagram", instagram), ("youtube", youtube), ("facebook", facebook)]:
    print(f"{name:<10} {a.grade.value:<3} flagged={a.flagged}")
assert facebook.grade is Grade.C
