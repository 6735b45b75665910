package geometry;

public final class Vec2 {
    private final double x;
    private final double y;

    public Vec2(double x, double y) {
        this.x = x;
        this.y = y;
    }

    public Vec2 add(Vec2 other) {
        return new Vec2(x + other.x, y + other.y);
    }

    public Vec2 scale(double factor) {
        return new Vec2(x * factor, y * factor);
    }

    public double dot(Vec2 other) {
        double a = x * other.x;
        double b = y * other.y;
        return a + b;
    }

    public double lengthSquared() {
        double xx = x * x;
        double yy = y * y;
        return xx + yy;
    }

    public double length() {
        return Math.sqrt(lengthSquared());
    }

    public boolean isShorterThan(double limit) {
        double len = lengthSquared();
        double lim = limit * limit;
        return len < lim;
    }

    public int quadrant() {
        int q = 0;
        if (x > 0 && y > 0) {
            q = 1;
        } else if (x < 0 && y > 0) {
            q = 2;
        } else if (x < 0 && y < 0) {
            q = 3;
        } else if (x > 0 && y < 0) {
            q = 4;
        }
        return q;
    }
}
