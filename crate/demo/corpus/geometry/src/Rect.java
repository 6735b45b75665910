package geometry;

public class Rect {
    private int left;
    private int top;
    private int width;
    private int height;

    public Rect(int left, int top, int width, int height) {
        this.left = left;
        this.top = top;
        this.width = width;
        this.height = height;
    }

    public int area() {
        int w = width;
        int h = height;
        return w * h;
    }

    public int perimeter() {
        int w = width;
        int h = height;
        return 2 * w + 2 * h;
    }

    public boolean contains(int px, int py) {
        int right = left + width;
        int bottom = top + height;
        return px >= left && px < right && py >= top && py < bottom;
    }

    public boolean intersects(Rect o) {
        int right = left + width;
        int bottom = top + height;
        int oRight = o.left + o.width;
        int oBottom = o.top + o.height;
        return left < oRight && o.left < right && top < oBottom && o.top < bottom;
    }

    public int centerX() {
        int half = width / 2;
        return left + half;
    }

    public int centerY() {
        int half = height / 2;
        return top + half;
    }

    public Rect grow(int margin) {
        int m2 = margin * 2;
        return new Rect(left - margin, top - margin, width + m2, height + m2);
    }
}
