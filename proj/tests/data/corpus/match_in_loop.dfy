datatype Op = Inc | Dec | Nop

method Run(ops: seq<Op>) returns (x: int)
  ensures -|ops| <= x <= |ops|
{
  x := 0;
  var i := 0;
  while i < |ops|
    invariant 0 <= i <= |ops|
    invariant -i <= x <= i
  {
    match ops[i] {
      case Inc => x := x + 1;
      case Dec => x := x - 1;
      case Nop =>
    }
    i := i + 1;
  }
}
