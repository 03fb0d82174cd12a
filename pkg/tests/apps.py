"""Small .mapp fixtures shared by the unit tests."""

from __future__ import annotations

MINIMAL = """
APP minimal
MANIFEST
main A1
END
ACTIVITY A1
widget b1 button click=A1.onClick
END
METHOD A1.onClick params=1 regs=1
return
END
"""

# onClick picks increase or decrease on a static; blocks 0,1,3 are the increase side.
FIG2 = """
APP fig2
MANIFEST
main A
static A.v int 1
END
ACTIVITY A
widget b button click=A.onClick
END
METHOD A.onClick params=1 regs=2
0: sget v0 A.v
1: ifz <= v0 4
2: invoke A.increase
3: goto 5
4: invoke A.decrease
5: return
END
METHOD A.increase params=0 regs=2
sget v0 A.v
const v1 1
binop + v0 v0 v1
sput v0 A.v
return
END
METHOD A.decrease params=0 regs=2
sget v0 A.v
const v1 1
binop - v0 v0 v1
sput v0 A.v
return
END
"""

# b1 only reaches B when X = 1; b2 sets X.
TWO_BUTTON = """
APP twobutton
MANIFEST
main A
static A.X int 0
END
ACTIVITY A
widget b1 button click=A.onB1
widget b2 button click=A.onB2
END
ACTIVITY B
END
METHOD A.onB1 params=1 regs=3
0: sget v0 A.X
1: const v1 1
2: if != v0 v1 6
3: const v2 "B"
4: api ui.startActivity v2
5: return
6: return
END
METHOD A.onB2 params=1 regs=2
const v1 1
sput v1 A.X
return
END
"""

# go reaches Done once the counter has been incremented three times.
COUNTER = """
APP counter
MANIFEST
main A
static A.n int 0
END
ACTIVITY A
widget inc button click=A.onInc
widget go button click=A.onGo
END
ACTIVITY Done
END
METHOD A.onInc params=1 regs=3
sget v0 A.n
const v1 1
binop + v0 v0 v1
sput v0 A.n
return
END
METHOD A.onGo params=1 regs=3
0: sget v0 A.n
1: const v1 3
2: if < v0 v1 6
3: const v2 "Done"
4: api ui.startActivity v2
5: return
6: return
END
"""

# Lifecycle callbacks, a receiver registration, a runtime rebinding and an intent filter.
LIFECYCLE = """
APP lifecycle
MANIFEST
main A1
filter A2 action.VIEW
filter A2 action.EDIT
static A1.count int 0
END
ACTIVITY A1
lifecycle onCreate A1.onCreate
lifecycle onPause A1.onPause
lifecycle onStop A1.onStop
widget b1 button click=A1.onClick
widget b2 button click=A1.onOther
widget tf textfield
END
ACTIVITY A2
lifecycle onCreate A2.onCreate
widget back button click=A2.onBack
END
METHOD A1.onCreate params=0 regs=3
const v0 0
sput v0 A1.count
const v1 "HEADSET"
const v2 "A1.onHeadset"
api sys.registerReceiver v1 v2
return
END
METHOD A1.onPause params=0 regs=1
return
END
METHOD A1.onStop params=0 regs=1
return
END
METHOD A1.onClick params=1 regs=2
const v1 "A2"
api ui.startActivity v1
return
END
METHOD A1.onOther params=1 regs=3
const v1 "b1"
const v2 "A1.onCount"
api ui.setHandler v1 v2
return
END
METHOD A1.onCount params=1 regs=3
sget v1 A1.count
const v2 1
binop + v1 v1 v2
sput v1 A1.count
return
END
METHOD A1.onHeadset params=1 regs=3
sget v1 A1.count
const v2 10
binop + v1 v1 v2
sput v1 A1.count
return
END
METHOD A2.onCreate params=0 regs=1
return
END
METHOD A2.onBack params=1 regs=1
api ui.finish
return
END
"""

# A loop, a self-recursive method and an unmodeled API guard.
LOOPY = """
APP loopy
MANIFEST
main A
static A.n int 0
END
ACTIVITY A
widget b button click=A.onLoop
widget r button click=A.rec
widget f button click=A.onFetch
END
METHOD A.onLoop params=1 regs=3
0: const v1 0
1: const v2 3
2: if >= v1 v2 6
3: const v0 1
4: binop + v1 v1 v0
5: goto 2
6: return
END
METHOD A.rec params=1 regs=2
0: invoke A.rec v0
1: return
END
METHOD A.onFetch params=1 regs=2
0: api net.fetch
1: move_result v1
2: ifz <= v1 4
3: sput v1 A.n
4: return
END
"""
