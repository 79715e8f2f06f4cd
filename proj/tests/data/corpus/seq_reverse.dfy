function Reverse<T>(s: seq<T>): seq<T>
{
  if |s| == 0 then [] else Reverse(s[1..]) + [s[0]]
}

lemma ReverseLength<T>(s: seq<T>)
  ensures |Reverse(s)| == |s|
{
  if |s| > 0 {
    ReverseLength(s[1..]);
  }
}

method ReverseArray(a: array<int>)
  modifies a
  ensures forall i :: 0 <= i < a.Length ==> a[i] == old(a[a.Length - 1 - i])
{
  var lo, hi := 0, a.Length - 1;
  while lo < hi
    invariant 0 <= lo <= hi + 1 <= a.Length
    invariant lo + hi == a.Length - 1
    invariant forall i :: 0 <= i < lo || hi < i < a.Length ==> a[i] == old(a[a.Length - 1 - i])
    invariant forall i :: lo <= i <= hi ==> a[i] == old(a[i])
    decreases hi - lo
  {
    a[lo], a[hi] := a[hi], a[lo];
    lo, hi := lo + 1, hi - 1;
  }
}
