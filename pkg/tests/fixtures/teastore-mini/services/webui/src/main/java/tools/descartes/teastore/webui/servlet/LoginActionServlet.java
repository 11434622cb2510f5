package tools.descartes.teastore.webui.servlet;

import java.io.IOException;
import javax.servlet.ServletException;
import javax.servlet.annotation.WebServlet;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

/**
 * Handles login and logout form posts.
 */
@WebServlet("/loginAction")
public class LoginActionServlet extends AbstractUIServlet {

    private static final long serialVersionUID = 1L;

    @Override
    protected void doPost(HttpServletRequest request, HttpServletResponse response)
            throws ServletException, IOException {
        SessionBlob blob = getSessionBlob(request);
        if (request.getParameter("logout") != null) {
            blob.setToken(null);
        } else {
            blob.setToken(request.getParameter("username"));
        }
        saveSessionBlob(blob, response);
        response.sendRedirect("index");
    }
}
